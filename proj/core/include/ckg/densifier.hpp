#pragma once

// Degree-balanced similarity densification.
//
// A node i with non-synthetic in-degree deg(i) receives k_i = max(0, m - deg(i))
// directed similarity edges from its cosine-nearest nodes. Candidates exclude
// i itself and its existing non-synthetic in-neighbours.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "ckg/features.hpp"
#include "ckg/model.hpp"
#include "ckg/store.hpp"
#include "ckg/tensor.hpp"

namespace ckg {

enum class DensifierMode {
  Ours,             // k-NN on encoder outputs, refreshed during training
  GlobalThreshold,  // raw features, cosine > threshold
  FixedNeighbor,    // raw features, k-NN up to `fixed_neighbors`
  None
};

struct DensifierConfig {
  std::size_t m = 5;
  std::size_t period = 100;
  DensifierMode mode = DensifierMode::Ours;
  double threshold = 0.95;
  std::size_t fixed_neighbors = 5;
};

std::string to_string(DensifierMode mode);
DensifierMode parse_densifier_mode(const std::string& s);

std::size_t compute_k(std::size_t m, std::size_t degree);

// Fresh synthetic edge set for `graph` (any existing synthetic edges are
// ignored). `embeddings` is [|V|, d].
SyntheticEdgeSet densify(const MultiGraph& graph, const Tensor& embeddings, std::size_t m,
                         std::uint64_t generation = 0);
SyntheticEdgeSet densify(const MultiGraph& graph, const RowView& rows, std::size_t m,
                         std::uint64_t generation = 0);

// Edge j -> i for every ordered pair with cosine(v_i, v_j) > tau.
SyntheticEdgeSet densify_global_threshold(const FeatureMatrix& features, double tau = 0.95);
SyntheticEdgeSet densify_global_threshold(const RowView& rows, double tau = 0.95);

// Raw-feature k-NN fill until every node has `n` in-neighbours.
SyntheticEdgeSet densify_fixed_neighbor(const MultiGraph& graph, const FeatureMatrix& features, std::size_t n = 5);

// Synthetic edges for the non-learned modes (GS/FN); empty for Ours/None.
SyntheticEdgeSet static_synthetic_edges(const MultiGraph& graph, const Tensor& features,
                                        const DensifierConfig& config);

struct TestTimeEmbedding {
  Tensor embeddings;
  SyntheticEdgeSet edges;
};

// Ours: encode the base graph, densify from those embeddings, encode again.
// GS/FN: encode once over the raw-feature synthetic edges. None: encode the
// base graph. Any synthetic edges already on `graph` are discarded first.
TestTimeEmbedding test_time_embed(const MultiGraph& graph, const Tensor& features, const Model& model,
                                  const DensifierConfig& config);

// Human-readable top-k neighbour listing by text.
std::string nearest_neighbor_report(const Tensor& embeddings, const Vocabulary& vocab,
                                    std::span<const EntityId> ids, std::size_t top_k = 3);

// TSV: source_id \t SIM \t target_id \t similarity
void write_synthetic_edges(const std::filesystem::path& path, const SyntheticEdgeSet& edges);

}  // namespace ckg
