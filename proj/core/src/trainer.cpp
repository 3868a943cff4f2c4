#include "ckg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <array>
#include <map>
#include <utility>

#include "ckg/densifier.hpp"
#include "ckg/error.hpp"
#include "ckg/parallel.hpp"

namespace ckg {

std::vector<Query> kvsall_pairs(const TripletSet& train, bool with_inverse) {
  if (train.empty()) throw DataError("kvsall_pairs: training set is empty");
  const auto base = static_cast<RelationId>(train.num_relations());
  std::map<std::pair<EntityId, RelationId>, std::vector<EntityId>> groups;
  for (const auto& t : train.triplets) {
    groups[{t.head, t.relation}].push_back(t.tail);
    if (with_inverse) groups[{t.tail, static_cast<RelationId>(t.relation + base)}].push_back(t.head);
  }
  std::vector<Query> out;
  out.reserve(groups.size());
  for (auto& [key, tails] : groups) {
    std::sort(tails.begin(), tails.end());
    tails.erase(std::unique(tails.begin(), tails.end()), tails.end());
    out.push_back({key.first, key.second, std::move(tails)});
  }
  return out;
}

EpochSample sample_epoch_subgraph(const MultiGraph& graph, std::span<const Query> queries,
                                  std::span<const EntityId> universe, std::size_t sample_size, std::uint64_t seed,
                                  std::uint64_t epoch) {
  if (sample_size == 0) throw ContractError("sample_epoch_subgraph: sample size must be >= 1");
  EpochSample s;
  if (universe.size() <= sample_size) {
    s.nodes.assign(universe.begin(), universe.end());
  } else {
    std::seed_seq seq{seed, epoch, std::uint64_t{0x73616d70}};
    std::mt19937_64 rng(seq);
    std::vector<EntityId> pool(universe.begin(), universe.end());
    // Partial Fisher-Yates: the first sample_size slots become the sample.
    for (std::size_t i = 0; i < sample_size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    s.nodes.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(sample_size));
  }
  std::sort(s.nodes.begin(), s.nodes.end());
  s.nodes.erase(std::unique(s.nodes.begin(), s.nodes.end()), s.nodes.end());
  s.edges = EdgeIndex::from_subgraph(graph, s.nodes);

  constexpr std::uint32_t kAbsent = ~std::uint32_t{0};
  std::vector<std::uint32_t> local(graph.num_nodes(), kAbsent);
  for (std::uint32_t k = 0; k < s.nodes.size(); ++k) local[s.nodes[k]] = k;
  for (const auto& q : queries) {
    if (q.head >= local.size() || local[q.head] == kAbsent) continue;
    Query lq{local[q.head], q.relation, {}};
    for (EntityId t : q.positives)
      if (t < local.size() && local[t] != kAbsent) lq.positives.push_back(local[t]);
    if (lq.positives.empty()) continue;
    std::sort(lq.positives.begin(), lq.positives.end());
    s.queries.push_back(std::move(lq));
  }
  return s;
}

Tensor label_matrix(std::span<const Query> batch, std::size_t num_candidates, double label_smoothing) {
  if (num_candidates == 0) throw ContractError("label_matrix: no candidates");
  const double off = label_smoothing / static_cast<double>(num_candidates);
  Tensor labels({batch.size(), num_candidates}, off);
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (EntityId t : batch[b].positives) {
      if (t >= num_candidates) throw ContractError("label_matrix: positive outside the candidate set");
      labels[b * num_candidates + t] = 1.0 - label_smoothing;
    }
  return labels;
}

double train_step(std::span<const Query> batch, const EpochSample& sample, const Tensor& sample_features,
                  Model& model, OptimizerState& optimizer, const TrainConfig& config,
                  std::mt19937_64* dropout_rng) {
  if (batch.empty()) throw ContractError("train_step: empty batch");
  ad::Tape tape;
  const ModelVars vars = bind_model(tape, model, true);
  std::vector<std::uint32_t> heads;
  std::vector<RelationId> rels;
  heads.reserve(batch.size());
  rels.reserve(batch.size());
  for (const auto& q : batch) {
    heads.push_back(q.head);
    rels.push_back(q.relation);
  }

  ad::Var logits;
  ad::Var loss;
  try {
    ad::Var h = encode(sample.edges, tape.constant(sample_features), vars.encoder, model.config.encoder);
    ad::Var z = decode_queries(vars.decoder, model.decoder, ad::gather_rows(h, heads), rels, model.config.decoder,
                               dropout_rng);
    logits = score_candidates(z, h);
    loss = ad::bce_with_logits(logits, label_matrix(batch, sample.nodes.size(), config.label_smoothing));
  } catch (const NumericError& e) {
    std::string detail = e.what();
    if (logits.valid()) {
      double max_logit = -INFINITY;
      for (double v : logits.value().values()) max_logit = std::max(max_logit, v);
      detail += "; max logit " + std::to_string(max_logit);
    }
    throw NumericError(detail);
  }
  const double value = loss.value().item();
  tape.backward(loss);

  const auto flat = vars.flat();
  std::vector<Tensor> grads;
  grads.reserve(flat.size());
  for (const auto& v : flat) grads.push_back(tape.grad(v));
  const auto params = model.parameters();
  adam_step(std::span<Tensor* const>(params), grads, optimizer);
  if (config.f32_storage)
    for (Tensor* p : params) p->round_to_f32();
  return value;
}

bool PlateauHalving::observe(double metric, double& lr) {
  if (metric > best_) {
    best_ = metric;
    bad_ = 0;
    return true;
  }
  if (++bad_ >= patience_) {
    lr *= 0.5;
    bad_ = 0;
  }
  return false;
}

std::string format_log_record(const LogRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "epoch=%zu step=%zu loss=%.9g lr=%.6g", r.epoch, r.step, r.loss, r.lr);
  std::string line = buf;
  if (r.val_mrr) {
    std::snprintf(buf, sizeof(buf), " val_mrr=%.9g", *r.val_mrr);
    line += buf;
  }
  return line;
}

namespace {

Tensor gather_feature_rows(const Tensor& features, std::span<const EntityId> nodes) {
  const std::size_t f = features.dim(1);
  Tensor out({nodes.size(), f});
  for (std::size_t k = 0; k < nodes.size(); ++k)
    std::copy_n(features.values().begin() + static_cast<std::ptrdiff_t>(nodes[k] * f), f,
                out.values().begin() + static_cast<std::ptrdiff_t>(k * f));
  return out;
}

// Entities touching at least one training triplet.
std::vector<EntityId> training_universe(const TripletSet& train, std::size_t num_entities) {
  std::vector<bool> seen(num_entities, false);
  for (const auto& t : train.triplets) seen[t.head] = seen[t.tail] = true;
  std::vector<EntityId> out;
  for (EntityId e = 0; e < num_entities; ++e)
    if (seen[e]) out.push_back(e);
  return out;
}

}  // namespace

FitResult fit(const SplitBundle& splits, const Tensor& features, const RunConfig& config, const FitOptions& options) {
  validate_config(config);
  if (!splits.vocab()) throw DataError("fit: training split has no vocabulary");
  const std::size_t num_entities = splits.train.num_entities();
  const std::size_t base_relations = splits.train.num_relations();
  if (features.rank() != 2 || features.dim(0) != num_entities)
    throw DataError("fit: feature rows (" + std::to_string(features.rank() == 2 ? features.dim(0) : 0) +
                    ") do not align with the entity table (" + std::to_string(num_entities) + ")");
  set_num_threads(config.threads);

  const TrainConfig& tc = config.train;
  Model model = Model::init(config.model_config(features.dim(1), base_relations), tc.seed);
  model.relation_names = splits.vocab()->relations.texts();

  ParamSet shapes;
  {
    const auto names = model.parameter_names();
    const auto tensors = std::as_const(model).parameters();
    for (std::size_t i = 0; i < names.size(); ++i) shapes.push_back({names[i], *tensors[i]});
  }
  OptimizerState optimizer = OptimizerState::for_params(shapes, AdamHyper{tc.lr, 0.9, 0.999, 1e-8});
  const auto config_echo = config_items(config);

  FitResult result;
  result.best_model = model;
  result.best_checkpoint = to_checkpoint(model, &optimizer, config_echo);
  result.final_model = model;
  if (tc.epochs == 0) return result;

  if (splits.train.empty()) throw DataError("fit: training split is empty");
  const MultiGraph base = build_graph(splits.train, true);
  MultiGraph graph = base;
  if (config.densifier.mode == DensifierMode::GlobalThreshold || config.densifier.mode == DensifierMode::FixedNeighbor)
    graph = base.with_synthetic(static_synthetic_edges(base, features, config.densifier));

  const std::vector<Query> queries = kvsall_pairs(splits.train, true);
  const std::vector<EntityId> universe = training_universe(splits.train, num_entities);
  const std::array<const TripletSet*, 3> known_sets{&splits.train, &splits.valid, &splits.test};
  const KnownSet known(base_relations, known_sets);

  std::seed_seq dropout_seq{tc.seed, std::uint64_t{0x64726f70}};
  std::mt19937_64 dropout_rng(dropout_seq);
  PlateauHalving schedule(tc.patience);
  std::uint64_t generation = 0;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    if (config.densifier.mode == DensifierMode::Ours && epoch > 0 && epoch % config.densifier.period == 0) {
      const Tensor embeddings = embed_nodes(model, graph, features);
      graph = base.with_synthetic(densify(base, embeddings, config.densifier.m, ++generation));
    }

    EpochSample sample = sample_epoch_subgraph(graph, queries, universe, tc.sample_size, tc.seed, epoch);
    {
      std::seed_seq order_seq{tc.seed, static_cast<std::uint64_t>(epoch), std::uint64_t{0x6f726472}};
      std::mt19937_64 order_rng(order_seq);
      std::shuffle(sample.queries.begin(), sample.queries.end(), order_rng);
    }
    const Tensor sample_features = gather_feature_rows(features, sample.nodes);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < sample.queries.size(); begin += tc.batch_size) {
      const std::size_t end = std::min(sample.queries.size(), begin + tc.batch_size);
      const std::span<const Query> batch(sample.queries.data() + begin, end - begin);
      try {
        loss_sum += train_step(batch, sample, sample_features, model, optimizer, tc, &dropout_rng);
      } catch (const NumericError& e) {
        throw NumericError("non-finite value at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batches) + ": " + e.what());
      }
      ++batches;
      ++step;
    }

    LogRecord record;
    record.epoch = epoch;
    record.step = step;
    record.loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    record.lr = optimizer.hyper.lr;

    const bool last = epoch + 1 == tc.epochs;
    if (((epoch + 1) % tc.val_interval == 0 || last) && !splits.valid.empty()) {
      const RankReport report = evaluate(model, splits.valid, known, base, features, config.densifier);
      record.val_mrr = report.mrr;
      double lr = optimizer.hyper.lr;
      if (schedule.observe(report.mrr, lr)) {
        result.best_val_mrr = report.mrr;
        result.best_model = model;
        result.best_checkpoint = to_checkpoint(model, &optimizer, config_echo);
        if (options.checkpoint_path) save_checkpoint(*options.checkpoint_path, result.best_checkpoint);
      }
      optimizer.hyper.lr = lr;
    }
    result.log.push_back(record);
    if (options.on_log) options.on_log(record);
    if (optimizer.hyper.lr < tc.min_lr) break;
  }

  result.final_model = model;
  if (splits.valid.empty()) {
    result.best_model = model;
    result.best_checkpoint = to_checkpoint(model, &optimizer, config_echo);
    if (options.checkpoint_path) save_checkpoint(*options.checkpoint_path, result.best_checkpoint);
  }
  return result;
}

}  // namespace ckg
