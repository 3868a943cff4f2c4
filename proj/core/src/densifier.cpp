#include "ckg/densifier.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ckg/error.hpp"
#include "ckg/parallel.hpp"

namespace ckg {

std::string to_string(DensifierMode mode) {
  switch (mode) {
    case DensifierMode::Ours: return "ours";
    case DensifierMode::GlobalThreshold: return "gs";
    case DensifierMode::FixedNeighbor: return "fn";
    case DensifierMode::None: return "none";
  }
  return "ours";
}

DensifierMode parse_densifier_mode(const std::string& s) {
  if (s == "ours") return DensifierMode::Ours;
  if (s == "gs") return DensifierMode::GlobalThreshold;
  if (s == "fn") return DensifierMode::FixedNeighbor;
  if (s == "none") return DensifierMode::None;
  throw ConfigError("unknown densifier '" + s + "' (expected ours|gs|fn|none)");
}

std::size_t compute_k(std::size_t m, std::size_t degree) { return m <= degree ? 0 : m - degree; }

SyntheticEdgeSet densify(const MultiGraph& graph, const RowView& rows, std::size_t m, std::uint64_t generation) {
  if (rows.rows != graph.num_nodes()) throw ContractError("densify: embedding rows do not match graph nodes");
  const RelationId sim = graph.similarity_relation();
  std::vector<std::uint32_t> queries;
  std::vector<std::size_t> budgets;
  std::vector<std::vector<std::uint32_t>> exclude;
  for (std::uint32_t i = 0; i < graph.num_nodes(); ++i) {
    const std::size_t k = compute_k(m, graph.degree(i));
    if (k == 0) continue;
    std::vector<std::uint32_t> skip;
    for (const auto& e : graph.in_edges(i))
      if (e.relation != sim) skip.push_back(e.source);
    std::sort(skip.begin(), skip.end());
    skip.erase(std::unique(skip.begin(), skip.end()), skip.end());
    queries.push_back(i);
    budgets.push_back(k);
    exclude.push_back(std::move(skip));
  }
  const auto neighbors = cosine_knn(rows, queries, budgets, exclude);
  SyntheticEdgeSet out;
  out.generation = generation;
  for (std::size_t q = 0; q < queries.size(); ++q)
    for (const auto& nb : neighbors[q]) out.edges.push_back({nb.id, queries[q], nb.similarity});
  return out;
}

SyntheticEdgeSet densify(const MultiGraph& graph, const Tensor& embeddings, std::size_t m, std::uint64_t generation) {
  if (embeddings.rank() != 2) throw ContractError("densify: embeddings must be a matrix");
  if (!embeddings.all_finite()) throw NumericError("densify: non-finite embeddings");
  return densify(graph, RowView{embeddings.values(), embeddings.dim(0), embeddings.dim(1)}, m, generation);
}

SyntheticEdgeSet densify_global_threshold(const RowView& rows, double tau) {
  if (!(tau > -1.0 && tau <= 1.0)) throw ContractError("densify_global_threshold: tau must lie in (-1, 1]");
  const std::size_t n = rows.rows;
  std::vector<std::vector<SyntheticEdge>> per_target(n);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double s = cosine_similarity(rows.row(i), rows.row(j));
        if (s > tau)
          per_target[i].push_back({static_cast<EntityId>(j), static_cast<EntityId>(i), s});
      }
  }, 8);
  SyntheticEdgeSet out;
  for (auto& edges : per_target) out.edges.insert(out.edges.end(), edges.begin(), edges.end());
  return out;
}

SyntheticEdgeSet densify_global_threshold(const FeatureMatrix& features, double tau) {
  const auto values = features.to_f64();
  return densify_global_threshold(RowView{values, features.rows(), features.dim()}, tau);
}

SyntheticEdgeSet densify_fixed_neighbor(const MultiGraph& graph, const FeatureMatrix& features, std::size_t n) {
  const auto values = features.to_f64();
  return densify(graph, RowView{values, features.rows(), features.dim()}, n);
}

SyntheticEdgeSet static_synthetic_edges(const MultiGraph& graph, const Tensor& features,
                                        const DensifierConfig& config) {
  const RowView rows{features.values(), features.dim(0), features.dim(1)};
  switch (config.mode) {
    case DensifierMode::GlobalThreshold: return densify_global_threshold(rows, config.threshold);
    case DensifierMode::FixedNeighbor: return densify(graph, rows, config.fixed_neighbors);
    case DensifierMode::Ours:
    case DensifierMode::None: break;
  }
  return {};
}

TestTimeEmbedding test_time_embed(const MultiGraph& graph, const Tensor& features, const Model& model,
                                  const DensifierConfig& config) {
  const MultiGraph base = graph.base_only();
  TestTimeEmbedding out;
  switch (config.mode) {
    case DensifierMode::None:
      out.embeddings = embed_nodes(model, base, features);
      break;
    case DensifierMode::GlobalThreshold:
    case DensifierMode::FixedNeighbor:
      out.edges = static_synthetic_edges(base, features, config);
      out.embeddings = embed_nodes(model, base.with_synthetic(out.edges), features);
      break;
    case DensifierMode::Ours: {
      const Tensor first = embed_nodes(model, base, features);
      out.edges = densify(base, first, config.m);
      out.embeddings = out.edges.edges.empty() ? first : embed_nodes(model, base.with_synthetic(out.edges), features);
      break;
    }
  }
  return out;
}

std::string nearest_neighbor_report(const Tensor& embeddings, const Vocabulary& vocab,
                                    std::span<const EntityId> ids, std::size_t top_k) {
  const RowView rows{embeddings.values(), embeddings.dim(0), embeddings.dim(1)};
  for (auto id : ids)
    if (id >= rows.rows || id >= vocab.entities.size())
      throw ContractError("nearest_neighbor_report: entity id " + std::to_string(id) + " out of range");
  const auto lists = cosine_knn(rows, ids, top_k);
  std::ostringstream out;
  char buf[32];
  for (std::size_t q = 0; q < ids.size(); ++q) {
    out << vocab.entities.text(ids[q]) << '\n';
    for (std::size_t r = 0; r < lists[q].size(); ++r) {
      std::snprintf(buf, sizeof(buf), "%.4f", lists[q][r].similarity);
      out << "  " << (r + 1) << ". " << vocab.entities.text(lists[q][r].id) << '\t' << buf << '\n';
    }
  }
  return out.str();
}

void write_synthetic_edges(const std::filesystem::path& path, const SyntheticEdgeSet& edges) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  char buf[32];
  for (const auto& e : edges.edges) {
    std::snprintf(buf, sizeof(buf), "%.6f", e.similarity);
    out << e.source << "\tSIM\t" << e.target << '\t' << buf << '\n';
  }
}

}  // namespace ckg
