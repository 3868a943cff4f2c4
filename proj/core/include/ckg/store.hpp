#pragma once

// Triplet storage, dataset splits and the multi-relational message-passing
// graph.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace ckg {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triplet {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

struct TripletHash {
  std::size_t operator()(const Triplet& t) const noexcept {
    std::uint64_t h = (static_cast<std::uint64_t>(t.head) << 32) ^ t.tail;
    h ^= static_cast<std::uint64_t>(t.relation) * 0x9E3779B97F4A7C15ULL;
    h ^= h >> 29;
    return static_cast<std::size_t>(h * 0xBF58476D1CE4E5B9ULL);
  }
};

// Bidirectional string <-> dense id map. Ids are assigned in first-seen order.
class SymbolTable {
 public:
  std::uint32_t intern(std::string_view text);
  std::optional<std::uint32_t> find(std::string_view text) const;
  const std::string& text(std::uint32_t id) const;
  std::size_t size() const { return texts_.size(); }
  const std::vector<std::string>& texts() const { return texts_; }

 private:
  std::vector<std::string> texts_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// Entity and relation tables shared by every split of one dataset.
struct Vocabulary {
  SymbolTable entities;
  SymbolTable relations;
};

enum class TsvFormat {
  ThreeColumn,      // head \t relation \t tail
  ScoredFourColumn  // relation \t head \t tail \t weight
};

struct TripletSet {
  std::shared_ptr<Vocabulary> vocab;
  std::vector<Triplet> triplets;
  // Per-triplet confidence from scored inputs; empty for three-column data.
  std::vector<double> weights;

  std::size_t size() const { return triplets.size(); }
  bool empty() const { return triplets.empty(); }
  std::size_t num_entities() const { return vocab ? vocab->entities.size() : 0; }
  std::size_t num_relations() const { return vocab ? vocab->relations.size() : 0; }
};

struct SplitBundle {
  TripletSet train;
  TripletSet valid;
  TripletSet test;

  const std::shared_ptr<Vocabulary>& vocab() const { return train.vocab; }
};

// Parses a TSV triplet file. Entities are interned by exact text into
// `vocab` (a fresh vocabulary when null). Duplicate triplets keep their
// first occurrence.
TripletSet ingest_triplets(const std::filesystem::path& path, TsvFormat format,
                           std::shared_ptr<Vocabulary> vocab = nullptr);
TripletSet ingest_triplets_from_string(std::string_view content, TsvFormat format,
                                       std::shared_ptr<Vocabulary> vocab = nullptr,
                                       std::string_view source_name = "<memory>");

SplitBundle uniform_split(const TripletSet& data, std::array<double, 3> ratios, std::uint64_t seed);

struct InductiveSplit {
  TripletSet valid;
  TripletSet test;
};
InductiveSplit inductive_filter(const SplitBundle& bundle);

// Entities mentioned by `eval` that appear in no `train` triplet, ascending.
std::vector<EntityId> unseen_entities(const TripletSet& train, const TripletSet& eval);

struct InEdge {
  EntityId source = 0;
  RelationId relation = 0;

  friend bool operator==(const InEdge&, const InEdge&) = default;
};

struct SyntheticEdge {
  EntityId source = 0;
  EntityId target = 0;
  double similarity = 0.0;
};

struct SyntheticEdgeSet {
  std::vector<SyntheticEdge> edges;  // sorted by (target, rank of neighbor)
  std::uint64_t generation = 0;
};

// Directed multi-relational graph stored as per-node in-edge lists.
// Relation ids: [0, R) original, [R, 2R) inverse (r + R), 2R similarity.
class MultiGraph {
 public:
  MultiGraph() = default;
  MultiGraph(std::size_t num_nodes, std::size_t num_base_relations);

  std::size_t num_nodes() const { return in_edges_.size(); }
  std::size_t num_base_relations() const { return num_base_relations_; }
  std::size_t num_relations() const { return 2 * num_base_relations_ + 1; }
  RelationId inverse_of(RelationId r) const {
    return static_cast<RelationId>(r < num_base_relations_ ? r + num_base_relations_
                                                            : r - num_base_relations_);
  }
  RelationId similarity_relation() const { return static_cast<RelationId>(2 * num_base_relations_); }

  // Every in-edge of `node`: original, inverse and synthetic.
  std::span<const InEdge> in_edges(EntityId node) const { return in_edges_.at(node); }
  // In-degree over original + inverse edges (synthetic excluded).
  std::size_t degree(EntityId node) const { return degree_.at(node); }
  // |N_i|: all in-edges including synthetic ones.
  std::size_t neighbor_count(EntityId node) const { return in_edges_.at(node).size(); }

  std::size_t num_base_edges() const { return num_base_edges_; }
  std::size_t num_synthetic_edges() const { return num_synthetic_edges_; }
  std::size_t num_edges() const { return num_base_edges_ + num_synthetic_edges_; }
  const std::vector<Triplet>& original_triplets() const { return original_; }
  bool has_inverse() const { return has_inverse_; }

  void add_base_edge(EntityId source, RelationId relation, EntityId target);
  // Copy of this graph with all synthetic edges replaced by `edges`.
  MultiGraph with_synthetic(const SyntheticEdgeSet& edges) const;
  // Copy with synthetic edges dropped.
  MultiGraph base_only() const;

 private:
  friend MultiGraph build_graph(const TripletSet&, bool);
  std::size_t num_base_relations_ = 0;
  std::vector<std::vector<InEdge>> in_edges_;
  std::vector<std::size_t> degree_;
  std::vector<Triplet> original_;
  std::size_t num_base_edges_ = 0;
  std::size_t num_synthetic_edges_ = 0;
  bool has_inverse_ = false;
};

// Graph over the full entity table; entities absent from `train` stay isolated.
MultiGraph build_graph(const TripletSet& train, bool add_inverse);

struct DegreeReport {
  // Original (non-inverse, non-synthetic) edges per node.
  double mean_in_degree = 0.0;
  // Per input triplet: (degree(head) + degree(tail)) / 2, where a node's
  // degree counts original edges incident to it.
  std::vector<double> triplet_degree;
  double mean_triplet_degree = 0.0;
  // histogram[b] counts triplet degrees in [b, b+1); the last bucket is open.
  std::vector<std::size_t> histogram;
};

DegreeReport degree_stats(const MultiGraph& graph, const TripletSet& triplets,
                          std::size_t histogram_buckets = 21);

// Split/table serialisation.
void write_triplets_tsv(const std::filesystem::path& path, const TripletSet& set);
void write_entity_table(const std::filesystem::path& path, const Vocabulary& vocab);
// Reads `id<TAB>text` lines into a fresh vocabulary; ids must be 0..n-1 in order.
std::shared_ptr<Vocabulary> read_entity_table(const std::filesystem::path& path);

}  // namespace ckg
