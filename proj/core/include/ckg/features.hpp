#pragma once

// Fixed per-entity feature matrix (CKGF files) and exact cosine k-NN.

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace ckg {

// Row i holds the feature vector of entity i. Values are stored as f32.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t dim, std::vector<float> values);

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  std::span<const float> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  std::span<const float> values() const { return values_; }

  // Row-major f64 copy, the layout the encoder consumes.
  std::vector<double> to_f64() const;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

// Binary layout: "CKGF", u32 version (1), u64 rows, u64 dim, rows*dim f32,
// all little-endian.
FeatureMatrix load_features(const std::filesystem::path& path, std::size_t expected_rows);
void save_features(const std::filesystem::path& path, const FeatureMatrix& matrix);

struct Neighbor {
  std::uint32_t id = 0;
  double similarity = 0.0;
};

// One list per query, ordered by (similarity desc, id asc).
using NeighborList = std::vector<std::vector<Neighbor>>;

// Read-only view of a dense row-major matrix of doubles.
struct RowView {
  std::span<const double> values;
  std::size_t rows = 0;
  std::size_t dim = 0;

  std::span<const double> row(std::size_t i) const { return values.subspan(i * dim, dim); }
};

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Top-k cosine neighbours of each query among all rows except the query
// itself and the ids in exclude[q] (sorted ascending; `exclude` may be
// empty). Zero-norm rows have similarity 0 to everything. When fewer than k
// candidates are eligible, all of them are returned.
NeighborList cosine_knn(const RowView& matrix, std::span<const std::uint32_t> queries, std::size_t k,
                        std::span<const std::vector<std::uint32_t>> exclude = {});
// Per-query budget variant: ks[q] neighbours for queries[q].
NeighborList cosine_knn(const RowView& matrix, std::span<const std::uint32_t> queries,
                        std::span<const std::size_t> ks,
                        std::span<const std::vector<std::uint32_t>> exclude = {});
NeighborList cosine_knn(const FeatureMatrix& matrix, std::span<const std::uint32_t> queries, std::size_t k,
                        std::span<const std::vector<std::uint32_t>> exclude = {});

}  // namespace ckg
