#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include "ckg/error.hpp"
#include "ckg/features.hpp"
#include "ckg/parallel.hpp"
#include "oracles.hpp"
#include "toy_kg.hpp"

namespace ckg {
namespace {

// Hand-assembled CKGF bytes, independent of save_features.
void write_raw(const std::filesystem::path& path, std::uint64_t rows, std::uint64_t dim,
               const std::vector<float>& values, std::uint32_t version = 1) {
  std::ofstream out(path, std::ios::binary);
  out.write("CKGF", 4);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&rows), 8);
  out.write(reinterpret_cast<const char*>(&dim), 8);
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * 4));
}

TEST(FeatureFile, ThreeByFour) {
  const auto dir = testing::temp_dir("features_basic");
  std::vector<float> v(12);
  for (int i = 0; i < 12; ++i) v[i] = static_cast<float>(i) * 0.5f;
  write_raw(dir / "f.ckgf", 3, 4, v);
  const auto m = load_features(dir / "f.ckgf", 3);
  EXPECT_EQ(m.rows(), 3u);
  EXPECT_EQ(m.dim(), 4u);
  EXPECT_EQ(m.row(2)[1], 4.5f);
}

TEST(FeatureFile, RowMismatchIsAnAlignmentError) {
  const auto dir = testing::temp_dir("features_rows");
  write_raw(dir / "f.ckgf", 3, 2, std::vector<float>(6, 1.0f));
  try {
    load_features(dir / "f.ckgf", 4);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("align"), std::string::npos) << e.what();
  }
}

TEST(FeatureFile, NanNamesTheRow) {
  const auto dir = testing::temp_dir("features_nan");
  std::vector<float> v(10 * 3, 0.25f);
  v[7 * 3 + 1] = std::numeric_limits<float>::quiet_NaN();
  write_raw(dir / "f.ckgf", 10, 3, v);
  try {
    load_features(dir / "f.ckgf", 10);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 7"), std::string::npos) << e.what();
  }
}

TEST(FeatureFile, BadMagicVersionAndTruncation) {
  const auto dir = testing::temp_dir("features_bad");
  write_raw(dir / "v.ckgf", 1, 1, {1.0f}, 2);
  EXPECT_THROW(load_features(dir / "v.ckgf", 1), ParseError);
  write_raw(dir / "t.ckgf", 2, 2, {1.0f, 2.0f});
  EXPECT_THROW(load_features(dir / "t.ckgf", 2), ParseError);
  std::ofstream(dir / "m.ckgf") << "NOPE";
  EXPECT_THROW(load_features(dir / "m.ckgf", 1), ParseError);
}

TEST(FeatureFile, SaveLoadRoundTripsBitExactly) {
  const auto dir = testing::temp_dir("features_roundtrip");
  std::mt19937 rng(3);
  std::normal_distribution<float> g;
  std::vector<float> v(50 * 7);
  for (auto& x : v) x = g(rng);
  const FeatureMatrix m(50, 7, v);
  save_features(dir / "a.ckgf", m);
  const auto back = load_features(dir / "a.ckgf", 50);
  ASSERT_EQ(back.values().size(), v.size());
  EXPECT_EQ(std::memcmp(back.values().data(), v.data(), v.size() * 4), 0);
  save_features(dir / "b.ckgf", back);
  std::ifstream a(dir / "a.ckgf", std::ios::binary), b(dir / "b.ckgf", std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}));
}

RowView view(const Tensor& t) { return RowView{t.values(), t.dim(0), t.dim(1)}; }

TEST(Knn, IdenticalRowComesFirstWithSimilarityOne) {
  Tensor t = Tensor::matrix(4, 2, {1, 0, 0, 1, 3, 0.5, 2, 0});
  const std::uint32_t q[] = {0};
  const auto res = cosine_knn(view(t), q, 3);
  ASSERT_EQ(res[0].size(), 3u);
  EXPECT_EQ(res[0][0].id, 3u);
  EXPECT_NEAR(res[0][0].similarity, 1.0, 1e-12);
}

TEST(Knn, KZeroAndShortLists) {
  Tensor t = testing::random_tensor({4, 3}, 1);
  const std::uint32_t q[] = {1};
  EXPECT_TRUE(cosine_knn(view(t), q, 0)[0].empty());
  EXPECT_EQ(cosine_knn(view(t), q, 10)[0].size(), 3u);
  const std::vector<std::vector<std::uint32_t>> ex{{0, 2}};
  EXPECT_EQ(cosine_knn(view(t), q, 10, ex)[0].size(), 1u);
}

TEST(Knn, ZeroNormRowsHaveSimilarityZero) {
  Tensor t = Tensor::matrix(3, 2, {0, 0, 1, 1, -1, -1});
  const std::uint32_t q[] = {1};
  const auto res = cosine_knn(view(t), q, 2);
  ASSERT_EQ(res[0].size(), 2u);
  EXPECT_EQ(res[0][0].id, 0u);
  EXPECT_EQ(res[0][0].similarity, 0.0);
  EXPECT_NEAR(res[0][1].similarity, -1.0, 1e-12);
}

TEST(Knn, TieBreakByAscendingId) {
  Tensor t = Tensor::matrix(5, 2, {1, 0, 2, 0, 1, 0, 0, 1, 5, 0});
  const std::uint32_t q[] = {2};
  const auto res = cosine_knn(view(t), q, 3);
  ASSERT_EQ(res[0].size(), 3u);
  EXPECT_EQ(res[0][0].id, 0u);
  EXPECT_EQ(res[0][1].id, 1u);
  EXPECT_EQ(res[0][2].id, 4u);
}

TEST(Knn, MatchesBruteForceOnRandomMatrices) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 5 + rng() % 60, d = 1 + rng() % 6, k = rng() % 8;
    Tensor t = testing::random_tensor({n, d}, seed + 100);
    std::vector<std::uint32_t> queries;
    std::vector<std::vector<std::uint32_t>> exclude;
    for (std::uint32_t i = 0; i < n; ++i) {
      queries.push_back(i);
      std::vector<std::uint32_t> ex;
      for (std::uint32_t j = 0; j < n; ++j)
        if (rng() % 7 == 0) ex.push_back(j);
      exclude.push_back(ex);
    }
    const auto res = cosine_knn(view(t), queries, k, exclude);
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto oracle = testing::naive_knn(t, i, exclude[i], k);
      ASSERT_EQ(res[i].size(), oracle.size());
      for (std::size_t r = 0; r < oracle.size(); ++r) {
        EXPECT_EQ(res[i][r].id, oracle[r].first);
        EXPECT_NEAR(res[i][r].similarity, oracle[r].second, 1e-6);
      }
    }
  }
}

TEST(Knn, ScaleInvariantOrdering) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Tensor t = testing::random_tensor({40, 5}, seed);
    Tensor scaled = t;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> factor(0.1, 10.0);
    for (std::size_t i = 0; i < 40; ++i) {
      const double f = factor(rng);
      for (std::size_t j = 0; j < 5; ++j) scaled[i * 5 + j] *= f;
    }
    std::vector<std::uint32_t> q(40);
    for (std::uint32_t i = 0; i < 40; ++i) q[i] = i;
    const auto a = cosine_knn(view(t), q, 5);
    const auto b = cosine_knn(view(scaled), q, 5);
    for (std::size_t i = 0; i < 40; ++i)
      for (std::size_t r = 0; r < 5; ++r) EXPECT_EQ(a[i][r].id, b[i][r].id);
  }
}

TEST(Knn, ThreadCountDoesNotChangeResults) {
  Tensor t = testing::random_tensor({300, 8}, 77);
  std::vector<std::uint32_t> q(300);
  for (std::uint32_t i = 0; i < 300; ++i) q[i] = i;
  set_num_threads(1);
  const auto a = cosine_knn(view(t), q, 6);
  set_num_threads(4);
  const auto b = cosine_knn(view(t), q, 6);
  set_num_threads(1);
  for (std::size_t i = 0; i < 300; ++i)
    for (std::size_t r = 0; r < 6; ++r) {
      EXPECT_EQ(a[i][r].id, b[i][r].id);
      EXPECT_EQ(a[i][r].similarity, b[i][r].similarity);
    }
}

}  // namespace
}  // namespace ckg
