#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ckg/tensor.hpp"

namespace ckg {

struct Parameter {
  std::string name;
  Tensor value;

  friend bool operator==(const Parameter&, const Parameter&) = default;
};

using ParamSet = std::vector<Parameter>;

struct AdamHyper {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment accumulators aligned with a ParamSet.
struct OptimizerState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  static OptimizerState for_params(const ParamSet& params, AdamHyper hyper);
};

// Bias-corrected adaptive-moment update, in place.
void adam_step(std::span<Parameter> params, std::span<const Tensor> grads, OptimizerState& state);
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, OptimizerState& state);

}  // namespace ckg
