#pragma once

// Filtered link-prediction ranking. Each triplet (h, r, t) yields two
// queries: (h, r, ?) with gold t and (t, r^-1, ?) with gold h. Ties are
// averaged: rank = 1 + #{s_j > s_gold} + #{j != gold : s_j = s_gold} / 2.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

#include "ckg/densifier.hpp"
#include "ckg/model.hpp"
#include "ckg/store.hpp"

namespace ckg {

// All known true triplets in both directions, keyed by (entity, relation)
// where inverse relations use ids r + R.
class KnownSet {
 public:
  KnownSet() = default;
  KnownSet(std::size_t num_base_relations, std::span<const TripletSet* const> sets);

  void add(const Triplet& t);
  // Sorted known answers for the query (entity, relation).
  std::span<const EntityId> answers(EntityId entity, RelationId relation) const;
  bool contains(const Triplet& t) const;
  std::size_t num_base_relations() const { return num_base_relations_; }

 private:
  static std::uint64_t key(EntityId e, RelationId r) { return (static_cast<std::uint64_t>(e) << 32) | r; }
  std::size_t num_base_relations_ = 0;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> answers_;
};

double filtered_rank(std::span<const double> scores, EntityId gold, std::span<const EntityId> filtered);

double mrr(std::span<const double> ranks);
double hits_at(std::span<const double> ranks, std::size_t k);

struct RankedQuery {
  Triplet triplet;
  bool inverse = false;  // true for the (t, r^-1, ?) direction
  double rank = 0.0;
};

struct RankReport {
  std::vector<RankedQuery> queries;
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;

  std::vector<double> ranks() const;
  static RankReport from_queries(std::vector<RankedQuery> queries);
};

// Ranks every query of `eval` using fixed node embeddings [|V|, d].
RankReport rank_with_embeddings(const Model& model, const Tensor& embeddings, const TripletSet& eval,
                                const KnownSet& known);

// Full evaluation: test-time embedding on `graph` (the training graph over
// the full entity table), then filtered ranking over all entities. With
// `inductive`, only triplets touching an entity absent from the graph's
// training triplets are scored.
RankReport evaluate(const Model& model, const TripletSet& eval, const KnownSet& known, const MultiGraph& graph,
                    const Tensor& features, const DensifierConfig& densifier, bool inductive = false);

// `metric<TAB>value` lines.
void write_metrics(std::ostream& out, const RankReport& report);
// `head<TAB>rel<TAB>tail<TAB>direction<TAB>rank` lines.
void write_rank_dump(const std::filesystem::path& path, const RankReport& report, const Vocabulary& vocab);

}  // namespace ckg
