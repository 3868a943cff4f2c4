#include "ckg/optim.hpp"

#include <cmath>

#include "ckg/error.hpp"

namespace ckg {

OptimizerState OptimizerState::for_params(const ParamSet& params, AdamHyper hyper) {
  OptimizerState s;
  s.hyper = hyper;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.value.shape(), 0.0);
    s.second_moment.emplace_back(p.value.shape(), 0.0);
  }
  return s;
}

void adam_step(std::span<Parameter> params, std::span<const Tensor> grads, OptimizerState& state) {
  std::vector<Tensor*> ptrs;
  for (auto& p : params) ptrs.push_back(&p.value);
  adam_step(std::span<Tensor* const>(ptrs), grads, state);
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, OptimizerState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size())
    throw ContractError("adam_step: parameter, gradient and state counts differ");
  for (std::size_t k = 0; k < params.size(); ++k)
    if (params[k]->shape() != grads[k].shape() || params[k]->shape() != state.first_moment[k].shape())
      throw ContractError("adam_step: shape mismatch for parameter " + std::to_string(k));

  ++state.step;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    const auto& g = grads[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
    }
  }
}

}  // namespace ckg
