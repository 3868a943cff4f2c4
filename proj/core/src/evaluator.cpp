#include "ckg/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "ckg/error.hpp"
#include "ckg/parallel.hpp"

namespace ckg {

KnownSet::KnownSet(std::size_t num_base_relations, std::span<const TripletSet* const> sets)
    : num_base_relations_(num_base_relations) {
  for (const TripletSet* s : sets)
    for (const auto& t : s->triplets) add(t);
}

void KnownSet::add(const Triplet& t) {
  const auto inv = static_cast<RelationId>(t.relation + num_base_relations_);
  for (auto [k, v] : {std::pair{key(t.head, t.relation), t.tail}, std::pair{key(t.tail, inv), t.head}}) {
    auto& list = answers_[k];
    const auto it = std::lower_bound(list.begin(), list.end(), v);
    if (it == list.end() || *it != v) list.insert(it, v);
  }
}

std::span<const EntityId> KnownSet::answers(EntityId entity, RelationId relation) const {
  const auto it = answers_.find(key(entity, relation));
  if (it == answers_.end()) return {};
  return it->second;
}

bool KnownSet::contains(const Triplet& t) const {
  const auto a = answers(t.head, t.relation);
  return std::binary_search(a.begin(), a.end(), t.tail);
}

double filtered_rank(std::span<const double> scores, EntityId gold, std::span<const EntityId> filtered) {
  if (gold >= scores.size()) throw ContractError("filtered_rank: gold id " + std::to_string(gold) + " out of range");
  std::vector<bool> masked(scores.size(), false);
  for (auto f : filtered)
    if (f < scores.size() && f != gold) masked[f] = true;
  const double s_gold = scores[gold];
  std::size_t higher = 0, ties = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (j == gold || masked[j]) continue;
    if (scores[j] > s_gold)
      ++higher;
    else if (scores[j] == s_gold)
      ++ties;
  }
  return 1.0 + static_cast<double>(higher) + 0.5 * static_cast<double>(ties);
}

double mrr(std::span<const double> ranks) {
  if (ranks.empty()) throw DataError("mrr: undefined for an empty rank list");
  double s = 0.0;
  for (double r : ranks) {
    if (!(r >= 1.0)) throw ContractError("mrr: ranks must be >= 1");
    s += 1.0 / r;
  }
  return s / static_cast<double>(ranks.size());
}

double hits_at(std::span<const double> ranks, std::size_t k) {
  if (ranks.empty()) throw DataError("hits_at: undefined for an empty rank list");
  std::size_t hits = 0;
  for (double r : ranks) {
    if (!(r >= 1.0)) throw ContractError("hits_at: ranks must be >= 1");
    if (r <= static_cast<double>(k)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

std::vector<double> RankReport::ranks() const {
  std::vector<double> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(q.rank);
  return out;
}

RankReport RankReport::from_queries(std::vector<RankedQuery> queries) {
  RankReport r;
  r.queries = std::move(queries);
  const auto ranks = r.ranks();
  r.mrr = ckg::mrr(ranks);
  r.hits1 = ckg::hits_at(ranks, 1);
  r.hits3 = ckg::hits_at(ranks, 3);
  r.hits10 = ckg::hits_at(ranks, 10);
  return r;
}

RankReport rank_with_embeddings(const Model& model, const Tensor& embeddings, const TripletSet& eval,
                                const KnownSet& known) {
  const std::size_t n = embeddings.dim(0);
  const std::size_t base = model.config.num_base_relations;
  std::vector<RankedQuery> queries;
  queries.reserve(2 * eval.size());
  for (const auto& t : eval.triplets) {
    if (t.head >= n || t.tail >= n) throw ContractError("evaluate: entity id out of range");
    if (t.relation >= base) throw ContractError("evaluate: relation id out of range");
    queries.push_back({t, false, 0.0});
    queries.push_back({t, true, 0.0});
  }

  constexpr std::size_t kChunk = 128;
  for (std::size_t begin = 0; begin < queries.size(); begin += kChunk) {
    const std::size_t end = std::min(queries.size(), begin + kChunk);
    std::vector<EntityId> heads;
    std::vector<RelationId> rels;
    for (std::size_t q = begin; q < end; ++q) {
      const auto& rq = queries[q];
      heads.push_back(rq.inverse ? rq.triplet.tail : rq.triplet.head);
      rels.push_back(rq.inverse ? static_cast<RelationId>(rq.triplet.relation + base) : rq.triplet.relation);
    }
    ad::Tape tape;
    const auto vars = bind_decoder(tape, model.decoder, false);
    ad::Var all = tape.constant(embeddings);
    ad::Var z = decode_queries(vars, model.decoder, ad::gather_rows(all, heads), rels, model.config.decoder);
    const Tensor& scores = score_candidates(z, all).value();
    parallel_for(end - begin, [&](std::size_t b0, std::size_t b1) {
      for (std::size_t b = b0; b < b1; ++b) {
        auto& rq = queries[begin + b];
        const EntityId gold = rq.inverse ? rq.triplet.head : rq.triplet.tail;
        const auto row = scores.values().subspan(b * n, n);
        rq.rank = filtered_rank(row, gold, known.answers(heads[b], rels[b]));
      }
    }, 8);
  }
  return RankReport::from_queries(std::move(queries));
}

RankReport evaluate(const Model& model, const TripletSet& eval, const KnownSet& known, const MultiGraph& graph,
                    const Tensor& features, const DensifierConfig& densifier, bool inductive) {
  const TripletSet* subset = &eval;
  TripletSet filtered;
  if (inductive) {
    std::vector<bool> seen(graph.num_nodes(), false);
    for (const auto& t : graph.original_triplets()) seen[t.head] = seen[t.tail] = true;
    filtered.vocab = eval.vocab;
    for (const auto& t : eval.triplets)
      if (!seen.at(t.head) || !seen.at(t.tail)) filtered.triplets.push_back(t);
    subset = &filtered;
  }
  if (subset->empty()) throw DataError("evaluate: no triplets to evaluate");
  const auto embedded = test_time_embed(graph, features, model, densifier);
  return rank_with_embeddings(model, embedded.embeddings, *subset, known);
}

void write_metrics(std::ostream& out, const RankReport& report) {
  char buf[64];
  auto line = [&](const char* name, double v) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    out << name << '\t' << buf << '\n';
  };
  line("MRR", report.mrr);
  line("Hits@1", report.hits1);
  line("Hits@3", report.hits3);
  line("Hits@10", report.hits10);
  out << "queries\t" << report.queries.size() << '\n';
}

void write_rank_dump(const std::filesystem::path& path, const RankReport& report, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& q : report.queries)
    out << vocab.entities.text(q.triplet.head) << '\t' << vocab.relations.text(q.triplet.relation) << '\t'
        << vocab.entities.text(q.triplet.tail) << '\t' << (q.inverse ? "head" : "tail") << '\t' << q.rank << '\n';
}

}  // namespace ckg
