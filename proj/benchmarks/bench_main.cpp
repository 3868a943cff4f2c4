#include <benchmark/benchmark.h>

#include <random>

#include "ckg/densifier.hpp"
#include "ckg/encoder.hpp"
#include "ckg/evaluator.hpp"
#include "ckg/features.hpp"
#include "ckg/model.hpp"

namespace {

using namespace ckg;

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Tensor t({rows, cols});
  for (auto& v : t.values()) v = g(rng);
  return t;
}

TripletSet random_graph(std::size_t nodes, std::size_t relations, std::size_t edges, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TripletSet set;
  set.vocab = std::make_shared<Vocabulary>();
  for (std::size_t i = 0; i < nodes; ++i) set.vocab->entities.intern("n" + std::to_string(i));
  for (std::size_t r = 0; r < relations; ++r) set.vocab->relations.intern("r" + std::to_string(r));
  for (std::size_t e = 0; e < edges; ++e)
    set.triplets.push_back({static_cast<EntityId>(rng() % nodes), static_cast<RelationId>(rng() % relations),
                            static_cast<EntityId>(rng() % nodes)});
  return set;
}

void BM_CosineKnn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor t = random_matrix(n, 64, 1);
  const RowView rows{t.values(), n, 64};
  std::vector<std::uint32_t> q(n);
  for (std::uint32_t i = 0; i < n; ++i) q[i] = i;
  for (auto _ : state) benchmark::DoNotOptimize(cosine_knn(rows, q, 5));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n));
}
BENCHMARK(BM_CosineKnn)->Arg(500)->Arg(2000);

void BM_Densify(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto g = build_graph(random_graph(n, 8, 2 * n, 2), true);
  const Tensor emb = random_matrix(n, 64, 3);
  for (auto _ : state) benchmark::DoNotOptimize(densify(g, emb, 5));
}
BENCHMARK(BM_Densify)->Arg(2000);

ModelConfig bench_config(std::size_t relations) {
  ModelConfig c;
  c.encoder.layers = 2;
  c.encoder.hidden_dim = 64;
  c.encoder.input_dim = 32;
  c.decoder.dim = 64;
  c.decoder.kernels = 32;
  c.decoder.kernel_width = 5;
  c.num_base_relations = relations;
  return c;
}

void BM_EncoderForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto g = build_graph(random_graph(n, 8, 4 * n, 4), true);
  const Model model = Model::init(bench_config(8), 1);
  const Tensor feats = random_matrix(n, 32, 5);
  for (auto _ : state) benchmark::DoNotOptimize(embed_nodes(model, g, feats));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * g.num_edges()));
}
BENCHMARK(BM_EncoderForward)->Arg(1000)->Arg(5000);

void BM_DecoderScoreAll(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Model model = Model::init(bench_config(8), 1);
  const Tensor cands = random_matrix(n, 64, 6);
  const auto head = cands.values().subspan(0, 64);
  for (auto _ : state) benchmark::DoNotOptimize(score_all(head, 3, cands, model.decoder, model.config.decoder));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_DecoderScoreAll)->Arg(10000);

void BM_FilteredRank(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor s = random_matrix(1, n, 7);
  std::vector<EntityId> filtered;
  for (EntityId j = 0; j < n; j += 97) filtered.push_back(j);
  for (auto _ : state) benchmark::DoNotOptimize(filtered_rank(s.values(), 5, filtered));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_FilteredRank)->Arg(80000);

}  // namespace

BENCHMARK_MAIN();
