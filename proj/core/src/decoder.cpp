#include "ckg/decoder.hpp"

#include <algorithm>
#include <numeric>

#include "ckg/encoder.hpp"
#include "ckg/error.hpp"

namespace ckg {

DecoderVars bind_decoder(ad::Tape& tape, const DecoderParams& p, bool trainable) {
  auto leaf = [&](const Tensor& t) { return trainable ? tape.variable(t) : tape.constant(t); };
  return {leaf(p.relations), leaf(p.kernels), leaf(p.projection)};
}

std::vector<std::uint32_t> invert_permutation(std::span<const std::uint32_t> perm) {
  std::vector<std::uint32_t> inv(perm.size());
  for (std::uint32_t j = 0; j < perm.size(); ++j) {
    if (perm[j] >= perm.size()) throw ContractError("invert_permutation: not a permutation");
    inv[perm[j]] = j;
  }
  return inv;
}

Tensor shuffle(const Tensor& stacked, const DecoderParams& params) {
  if (stacked.rank() != 2 || stacked.dim(0) != 2 || stacked.dim(1) != params.perm_head.size())
    throw ContractError("shuffle: expected a [2, d] stack");
  const std::size_t d = stacked.dim(1);
  Tensor out(stacked.shape(), 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    out[j] = stacked[params.perm_head[j]];
    out[d + j] = stacked[d + params.perm_relation[j]];
  }
  return out;
}

namespace {

ad::Var dropout(ad::Var x, double rate, std::mt19937_64* rng) {
  if (!rng || rate <= 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  Tensor mask(x.value().shape(), 0.0);
  for (auto& v : mask.values()) v = keep(*rng) ? scale : 0.0;
  return ad::mul(x, x.tape().constant(std::move(mask)));
}

}  // namespace

ad::Var decode_queries(const DecoderVars& vars, const DecoderParams& params, ad::Var heads,
                       std::span<const RelationId> relations, const DecoderConfig& config,
                       std::mt19937_64* dropout_rng) {
  const std::size_t d = params.dim();
  const std::size_t batch = relations.size();
  if (heads.value().rank() != 2 || heads.value().dim(0) != batch || heads.value().dim(1) != d)
    throw ContractError("decode_queries: heads must be [B, d] with d = " + std::to_string(d));
  for (auto r : relations)
    if (r >= params.num_relations()) throw ContractError("decode_queries: unknown relation id " + std::to_string(r));
  const std::size_t nk = params.kernels.dim(0);

  ad::Var rel = ad::gather_rows(vars.relations, relations);
  const ad::Var rows[] = {ad::permute_columns(heads, params.perm_head),
                          ad::permute_columns(rel, params.perm_relation)};
  ad::Var stack = ad::reshape(ad::concat(rows, 1), {batch, 2, d});
  stack = dropout(stack, config.input_dropout, dropout_rng);
  ad::Var feature_map = ad::relu(ad::conv1d_same(stack, vars.kernels));
  feature_map = dropout(feature_map, config.feature_dropout, dropout_rng);
  ad::Var flat = ad::reshape(feature_map, {batch, nk * d});
  ad::Var z = ad::relu(ad::matmul(flat, vars.projection));
  return dropout(z, config.projection_dropout, dropout_rng);
}

ad::Var score_candidates(ad::Var queries, ad::Var candidates) {
  return ad::matmul(queries, ad::transpose(candidates));
}

std::vector<double> score_all(std::span<const double> head, RelationId relation, const Tensor& candidates,
                              const DecoderParams& params, const DecoderConfig& config) {
  const std::size_t d = params.dim();
  if (head.size() != d) throw ContractError("score_all: head embedding has wrong dimension");
  if (candidates.rank() != 2 || candidates.dim(1) != d) throw ContractError("score_all: candidates must be [C, d]");
  ad::Tape tape;
  const auto vars = bind_decoder(tape, params, false);
  ad::Var h = tape.constant(Tensor(Shape{1, d}, std::vector<double>(head.begin(), head.end())));
  const RelationId rels[] = {relation};
  ad::Var z = decode_queries(vars, params, h, rels, config, nullptr);
  const auto& scores = score_candidates(z, tape.constant(candidates)).value();
  return {scores.values().begin(), scores.values().end()};
}

double score_triplet(std::span<const double> head, RelationId relation, std::span<const double> tail,
                     const DecoderParams& params, const DecoderConfig& config) {
  Tensor c(Shape{1, tail.size()}, std::vector<double>(tail.begin(), tail.end()));
  return score_all(head, relation, c, params, config)[0];
}

DecoderParams init_decoder_params(const DecoderConfig& config, std::size_t num_relations, std::uint64_t seed) {
  if (config.dim == 0 || config.kernels == 0 || config.kernel_width == 0 || config.kernel_width > config.dim)
    throw ContractError("init_decoder_params: invalid decoder dimensions");
  std::seed_seq seq{seed, std::uint64_t{0x636f6e76}};
  std::mt19937_64 seeder(seq);
  const std::size_t d = config.dim, nk = config.kernels, n = config.kernel_width;
  DecoderParams p;
  p.relations = glorot_uniform({num_relations, d}, num_relations, d, seeder());
  p.kernels = glorot_uniform({nk, 2, n}, 2 * n, nk * n, seeder());
  p.projection = glorot_uniform({nk * d, d}, nk * d, d, seeder());
  p.perm_head.resize(d);
  p.perm_relation.resize(d);
  std::iota(p.perm_head.begin(), p.perm_head.end(), 0u);
  std::iota(p.perm_relation.begin(), p.perm_relation.end(), 0u);
  std::mt19937_64 perm_rng(seeder());
  if (config.shuffle) {
    std::shuffle(p.perm_head.begin(), p.perm_head.end(), perm_rng);
    std::shuffle(p.perm_relation.begin(), p.perm_relation.end(), perm_rng);
  }
  return p;
}

}  // namespace ckg
