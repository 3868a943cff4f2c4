#pragma once

// Shuffled Conv-TransE scorer.
//
//   stack = [perm_h(e_h); perm_r(e_r)]            2 x d
//   M     = relu(conv1d_same(stack, kernels))      K x d
//   z     = relu(vec(M) W)                         d
//   score(h, r, t) = <z, e_t>

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ckg/autodiff.hpp"
#include "ckg/store.hpp"
#include "ckg/tensor.hpp"

namespace ckg {

struct DecoderConfig {
  std::size_t dim = 500;
  std::size_t kernels = 300;
  std::size_t kernel_width = 5;
  double input_dropout = 0.2;
  double feature_dropout = 0.2;
  double projection_dropout = 0.2;
  bool shuffle = true;
};

struct DecoderParams {
  Tensor relations;   // [num_relations, d]: originals, inverses, unused SIM row
  Tensor kernels;     // [K, 2, n]
  Tensor projection;  // [K*d, d]
  std::vector<std::uint32_t> perm_head;
  std::vector<std::uint32_t> perm_relation;

  std::size_t dim() const { return projection.dim(1); }
  std::size_t num_relations() const { return relations.dim(0); }
};

struct DecoderVars {
  ad::Var relations, kernels, projection;
};

DecoderVars bind_decoder(ad::Tape& tape, const DecoderParams& params, bool trainable);

std::vector<std::uint32_t> invert_permutation(std::span<const std::uint32_t> perm);

// Applies the fixed per-row column permutations to a [2, d] stack.
Tensor shuffle(const Tensor& stacked, const DecoderParams& params);

// Query vectors z for B (head, relation) pairs: [B, d]. Dropout is applied
// only when `dropout_rng` is non-null.
ad::Var decode_queries(const DecoderVars& vars, const DecoderParams& params, ad::Var heads,
                       std::span<const RelationId> relations, const DecoderConfig& config,
                       std::mt19937_64* dropout_rng = nullptr);

// [B, d] x [C, d]^T -> [B, C] logits.
ad::Var score_candidates(ad::Var queries, ad::Var candidates);

// Logits of one (e_h, r) query against every row of `candidates` [C, d].
std::vector<double> score_all(std::span<const double> head, RelationId relation, const Tensor& candidates,
                              const DecoderParams& params, const DecoderConfig& config);
double score_triplet(std::span<const double> head, RelationId relation, std::span<const double> tail,
                     const DecoderParams& params, const DecoderConfig& config);

DecoderParams init_decoder_params(const DecoderConfig& config, std::size_t num_relations, std::uint64_t seed);

}  // namespace ckg
