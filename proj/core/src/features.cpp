#include "ckg/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "ckg/error.hpp"
#include "ckg/parallel.hpp"

namespace ckg {

static_assert(std::endian::native == std::endian::little, "CKGF I/O assumes a little-endian host");

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t dim, std::vector<float> values)
    : rows_(rows), dim_(dim), values_(std::move(values)) {
  if (dim_ == 0) throw DataError("feature dim must be >= 1");
  if (values_.size() != rows_ * dim_) throw DataError("feature value count does not match rows*dim");
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i]))
      throw DataError("non-finite feature value at row " + std::to_string(i / dim_));
}

std::vector<double> FeatureMatrix::to_f64() const { return {values_.begin(), values_.end()}; }

namespace {

constexpr char kMagic[4] = {'C', 'K', 'G', 'F'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void read_pod(std::istream& in, T& value, const std::string& what) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ParseError("truncated feature file while reading " + what);
}

}  // namespace

FeatureMatrix load_features(const std::filesystem::path& path, std::size_t expected_rows) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw ParseError(path.string() + ": bad CKGF magic");
  std::uint32_t version = 0;
  std::uint64_t rows = 0, dim = 0;
  read_pod(in, version, "version");
  if (version != kVersion) throw ParseError(path.string() + ": unsupported CKGF version " + std::to_string(version));
  read_pod(in, rows, "rows");
  read_pod(in, dim, "dim");
  if (rows != expected_rows)
    throw DataError(path.string() + ": feature rows (" + std::to_string(rows) +
                    ") do not align with entity table (" + std::to_string(expected_rows) + ")");
  if (dim == 0) throw DataError(path.string() + ": feature dim must be >= 1");
  std::vector<float> values(rows * dim);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!in) throw ParseError(path.string() + ": truncated feature payload");
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i]))
      throw DataError(path.string() + ": non-finite feature value at row " + std::to_string(i / dim));
  return FeatureMatrix(rows, dim, std::move(values));
}

void save_features(const std::filesystem::path& path, const FeatureMatrix& matrix) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write feature file " + path.string());
  const std::uint64_t rows = matrix.rows(), dim = matrix.dim();
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  const auto values = matrix.values();
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  if (!out) throw DataError("failed writing feature file " + path.string());
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

NeighborList cosine_knn(const RowView& matrix, std::span<const std::uint32_t> queries,
                        std::span<const std::size_t> ks,
                        std::span<const std::vector<std::uint32_t>> exclude) {
  if (ks.size() != queries.size()) throw ContractError("cosine_knn: one budget per query required");
  if (!exclude.empty() && exclude.size() != queries.size())
    throw ContractError("cosine_knn: exclude must be empty or one set per query");
  const std::size_t n = matrix.rows;
  for (auto q : queries)
    if (q >= n) throw ContractError("cosine_knn: query id out of range");

  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (double v : matrix.row(i)) s += v * v;
    norms[i] = std::sqrt(s);
  }

  NeighborList result(queries.size());
  auto better = [](const Neighbor& a, const Neighbor& b) {
    return a.similarity > b.similarity || (a.similarity == b.similarity && a.id < b.id);
  };
  parallel_for(queries.size(), [&](std::size_t begin, std::size_t end) {
    std::vector<Neighbor> candidates;
    for (std::size_t qi = begin; qi < end; ++qi) {
      const std::uint32_t q = queries[qi];
      const std::size_t k = ks[qi];
      if (k == 0) continue;
      const auto qrow = matrix.row(q);
      const double qnorm = norms[q];
      const std::vector<std::uint32_t>* skip = exclude.empty() ? nullptr : &exclude[qi];
      candidates.clear();
      for (std::uint32_t j = 0; j < n; ++j) {
        if (j == q) continue;
        if (skip && std::binary_search(skip->begin(), skip->end(), j)) continue;
        double sim = 0.0;
        if (qnorm > 0.0 && norms[j] > 0.0) {
          const auto r = matrix.row(j);
          double dot = 0.0;
          for (std::size_t c = 0; c < matrix.dim; ++c) dot += qrow[c] * r[c];
          sim = std::clamp(dot / (qnorm * norms[j]), -1.0, 1.0);
        }
        candidates.push_back({j, sim});
      }
      const std::size_t take = std::min(k, candidates.size());
      std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                        candidates.end(), better);
      result[qi].assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take));
    }
  }, 8);
  return result;
}

NeighborList cosine_knn(const RowView& matrix, std::span<const std::uint32_t> queries, std::size_t k,
                        std::span<const std::vector<std::uint32_t>> exclude) {
  const std::vector<std::size_t> ks(queries.size(), k);
  return cosine_knn(matrix, queries, std::span<const std::size_t>(ks), exclude);
}

NeighborList cosine_knn(const FeatureMatrix& matrix, std::span<const std::uint32_t> queries, std::size_t k,
                        std::span<const std::vector<std::uint32_t>> exclude) {
  const auto values = matrix.to_f64();
  return cosine_knn(RowView{values, matrix.rows(), matrix.dim()}, queries, k, exclude);
}

}  // namespace ckg
