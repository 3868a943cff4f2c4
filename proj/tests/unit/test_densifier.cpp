#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "ckg/densifier.hpp"
#include "ckg/error.hpp"
#include "oracles.hpp"
#include "toy_kg.hpp"

namespace ckg {
namespace {

std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs(const SyntheticEdgeSet& s) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (const auto& e : s.edges) out.emplace_back(e.source, e.target);
  return out;
}

std::vector<std::size_t> in_degree_with(const MultiGraph& g, const SyntheticEdgeSet& s) {
  std::vector<std::size_t> deg(g.num_nodes());
  for (std::uint32_t i = 0; i < g.num_nodes(); ++i) deg[i] = g.degree(i);
  for (const auto& e : s.edges) ++deg[e.target];
  return deg;
}

MultiGraph isolated_graph(std::size_t nodes) { return MultiGraph(nodes, 1); }

TEST(ComputeK, Values) {
  EXPECT_EQ(compute_k(5, 7), 0u);
  EXPECT_EQ(compute_k(5, 5), 0u);
  EXPECT_EQ(compute_k(5, 2), 3u);
  EXPECT_EQ(compute_k(3, 0), 3u);
}

TEST(Densify, MatchesNaiveOracleOnRandomGraphs) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 10 + rng() % 150, m = 1 + rng() % 8;
    const auto set = testing::random_triplets(n, 1 + rng() % 4, 1 + rng() % (3 * n), seed);
    const auto g = build_graph(set, true);
    const Tensor emb = testing::random_tensor({n, 1 + rng() % 6}, seed + 7);
    const auto got = densify(g, emb, m);
    EXPECT_EQ(pairs(got), testing::naive_densify(g, emb, m)) << "seed " << seed;
  }
}

TEST(Densify, DegreeFloorAndHighDegreeNodesUntouched) {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const std::size_t n = 60, m = 5;
    const auto g = build_graph(testing::random_triplets(n, 3, 70, seed), true);
    const auto s = densify(g, testing::random_tensor({n, 4}, seed), m);
    const auto deg = in_degree_with(g, s);
    for (std::uint32_t i = 0; i < n; ++i) {
      EXPECT_GE(deg[i], std::min(m, n - 1));
      if (g.degree(i) >= m) EXPECT_EQ(deg[i], g.degree(i));
    }
  }
}

TEST(Densify, NoSelfOrDuplicateOrExistingNeighbourEdges) {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const auto g = build_graph(testing::random_triplets(40, 2, 50, seed), true);
    const auto s = densify(g, testing::random_tensor({40, 3}, seed + 1), 6);
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (const auto& e : s.edges) {
      EXPECT_NE(e.source, e.target);
      EXPECT_TRUE(seen.emplace(e.source, e.target).second);
      for (const auto& in : g.in_edges(e.target)) EXPECT_NE(in.source, e.source);
    }
  }
}

TEST(Densify, IsolatedNodeGetsExactlyM) {
  const auto g = isolated_graph(100);
  const auto s = densify(g, testing::random_tensor({100, 8}, 3), 5);
  std::size_t into_zero = 0;
  for (const auto& e : s.edges) into_zero += e.target == 0;
  EXPECT_EQ(into_zero, 5u);
  EXPECT_EQ(s.edges.size(), 500u);
}

TEST(Densify, TinyGraphCapsAtOtherNodes) {
  const auto g = isolated_graph(3);
  const auto s = densify(g, testing::random_tensor({3, 2}, 1), 5);
  EXPECT_EQ(s.edges.size(), 6u);
}

TEST(Densify, RefreshIsIdempotentAndReplacesPreviousEdges) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = build_graph(testing::random_triplets(50, 2, 40, seed), true);
    const Tensor emb = testing::random_tensor({50, 5}, seed + 11);
    const auto first = densify(g, emb, 4);
    const auto densified = g.with_synthetic(first);
    EXPECT_EQ(pairs(densify(densified, emb, 4)), pairs(first));

    const Tensor other = testing::random_tensor({50, 5}, seed + 99);
    const auto refreshed = densify(densified, other, 4);
    EXPECT_EQ(pairs(refreshed), pairs(densify(g, other, 4)));
    const auto regraph = densified.with_synthetic(refreshed);
    EXPECT_EQ(regraph.num_synthetic_edges(), refreshed.edges.size());
    EXPECT_EQ(regraph.num_base_edges(), g.num_base_edges());
  }
}

TEST(Densify, ScaleInvariant) {
  const auto g = build_graph(testing::random_triplets(40, 2, 30, 5), true);
  Tensor emb = testing::random_tensor({40, 6}, 5);
  const auto a = densify(g, emb, 5);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> f(0.2, 5.0);
  for (std::size_t i = 0; i < 40; ++i) {
    const double s = f(rng);
    for (std::size_t j = 0; j < 6; ++j) emb.at(i, j) *= s;
  }
  EXPECT_EQ(pairs(densify(g, emb, 5)), pairs(a));
}

TEST(Densify, RejectsMismatchedRowsAndNonFinite) {
  const auto g = isolated_graph(4);
  EXPECT_THROW(densify(g, Tensor({3, 2}, 1.0), 2), ContractError);
  Tensor bad({4, 2}, 1.0);
  bad[3] = std::nan("");
  EXPECT_THROW(densify(g, bad, 2), NumericError);
}

FeatureMatrix to_features(const Tensor& t) {
  std::vector<float> v(t.values().begin(), t.values().end());
  return FeatureMatrix(t.dim(0), t.dim(1), v);
}

TEST(GlobalThreshold, DuplicatesAndOrthogonalRows) {
  const auto dup = densify_global_threshold(to_features(Tensor::matrix(3, 2, {1, 2, 1, 2, -2, 1})), 0.95);
  EXPECT_EQ(pairs(dup), (std::vector<std::pair<std::uint32_t, std::uint32_t>>{{1, 0}, {0, 1}}));
  const auto ortho = densify_global_threshold(to_features(Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1})), 0.5);
  EXPECT_TRUE(ortho.edges.empty());
}

TEST(GlobalThreshold, MatchesAllPairsScan) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor t = testing::random_tensor({10, 4}, seed);
    const auto fm = to_features(t);
    const auto f64 = fm.to_f64();
    const Tensor rounded({10, 4}, f64);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> expect;
    for (std::uint32_t i = 0; i < 10; ++i)
      for (std::uint32_t j = 0; j < 10; ++j)
        if (i != j && testing::naive_cosine(rounded.values().subspan(i * 4, 4), rounded.values().subspan(j * 4, 4)) > 0.5)
          expect.emplace_back(j, i);
    EXPECT_EQ(pairs(densify_global_threshold(fm, 0.5)), expect);
  }
}

TEST(FixedNeighbor, HighDegreeUnchangedIsolatedFilled) {
  auto vocab = std::make_shared<Vocabulary>();
  for (int i = 0; i < 12; ++i) vocab->entities.intern("n" + std::to_string(i));
  vocab->relations.intern("R");
  TripletSet set;
  set.vocab = vocab;
  for (EntityId j = 1; j <= 7; ++j) set.triplets.push_back({j, 0, 0});
  const auto g = build_graph(set, false);
  ASSERT_EQ(g.degree(0), 7u);
  const auto fm = to_features(testing::random_tensor({12, 3}, 4));
  const auto s = densify_fixed_neighbor(g, fm, 5);
  const auto deg = in_degree_with(g, s);
  EXPECT_EQ(deg[0], 7u);
  EXPECT_EQ(deg[11], 5u);
  EXPECT_EQ(deg[3], 5u);
}

Model tiny_model(std::size_t f, std::size_t r, std::uint64_t seed) {
  ModelConfig c;
  c.encoder.layers = 1;
  c.encoder.hidden_dim = 6;
  c.encoder.input_dim = f;
  c.decoder.dim = 6;
  c.decoder.kernels = 2;
  c.decoder.kernel_width = 3;
  c.num_base_relations = r;
  return Model::init(c, seed);
}

TEST(TestTimeEmbed, NoOpWhenEveryDegreeReachesM) {
  auto vocab = std::make_shared<Vocabulary>();
  for (int i = 0; i < 6; ++i) vocab->entities.intern("n" + std::to_string(i));
  vocab->relations.intern("R");
  TripletSet set;
  set.vocab = vocab;
  for (EntityId a = 0; a < 6; ++a)
    for (EntityId b = 0; b < 6; ++b)
      if (a != b) set.triplets.push_back({a, 0, b});
  const auto g = build_graph(set, true);
  const Tensor feats = testing::random_tensor({6, 4}, 1);
  const Model model = tiny_model(4, 1, 2);
  DensifierConfig dc;
  dc.m = 3;
  const auto out = test_time_embed(g, feats, model, dc);
  EXPECT_TRUE(out.edges.edges.empty());
  EXPECT_EQ(out.embeddings, embed_nodes(model, g, feats));
}

TEST(TestTimeEmbed, UnseenNodeReceivesNeighbours) {
  const auto set = testing::random_triplets(20, 2, 80, 3);
  // Node 20 is appended with no edges at all.
  auto vocab = std::make_shared<Vocabulary>(*set.vocab);
  vocab->entities.intern("unseen");
  TripletSet grown = set;
  grown.vocab = vocab;
  const auto g = build_graph(grown, true);
  ASSERT_EQ(g.num_nodes(), 21u);
  ASSERT_EQ(g.degree(20), 0u);
  const Tensor feats = testing::random_tensor({21, 4}, 9);
  const Model model = tiny_model(4, 2, 5);
  DensifierConfig dc;
  dc.m = 5;
  const auto out = test_time_embed(g, feats, model, dc);
  std::size_t into = 0;
  for (const auto& e : out.edges.edges) into += e.target == 20;
  EXPECT_EQ(into, 5u);
  EXPECT_NE(out.embeddings, embed_nodes(model, g, feats));

  dc.mode = DensifierMode::None;
  EXPECT_EQ(test_time_embed(g, feats, model, dc).embeddings, embed_nodes(model, g, feats));
}

TEST(NeighborReport, DuplicateListedFirst) {
  Vocabulary v;
  for (const char* s : {"alpha", "beta", "gamma", "delta"}) v.entities.intern(s);
  const Tensor emb = Tensor::matrix(4, 2, {1, 1, 0, 1, 2, 2, -1, 0});
  const EntityId ids[] = {0};
  const auto text = nearest_neighbor_report(emb, v, ids, 2);
  EXPECT_EQ(text, "alpha\n  1. gamma\t1.0000\n  2. beta\t0.7071\n");
  EXPECT_EQ(nearest_neighbor_report(emb, v, ids, 0), "alpha\n");
  const EntityId bad[] = {9};
  EXPECT_THROW(nearest_neighbor_report(emb, v, bad, 1), ContractError);
}

TEST(NeighborReport, PlantedNearDuplicatesFound) {
  Tensor emb = testing::random_tensor({30, 8}, 4);
  for (std::size_t j = 0; j < 8; ++j) emb.at(17, j) = emb.at(3, j) * 1.001 + 1e-4;
  Vocabulary v;
  for (int i = 0; i < 30; ++i) v.entities.intern("e" + std::to_string(i));
  const EntityId ids[] = {3, 17};
  const auto text = nearest_neighbor_report(emb, v, ids, 1);
  EXPECT_NE(text.find("e3\n  1. e17\t"), std::string::npos) << text;
  EXPECT_NE(text.find("e17\n  1. e3\t"), std::string::npos) << text;
}

TEST(Modes, ParseAndPrint) {
  for (auto m : {DensifierMode::Ours, DensifierMode::GlobalThreshold, DensifierMode::FixedNeighbor, DensifierMode::None})
    EXPECT_EQ(parse_densifier_mode(to_string(m)), m);
  EXPECT_THROW(parse_densifier_mode("knn"), ConfigError);
}

}  // namespace
}  // namespace ckg
