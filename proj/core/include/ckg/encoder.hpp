#pragma once

// Gated relational graph convolution (GR-GCN) encoder.
//
// Per layer and node i:
//   u_c  = h_i W_self
//   u_n  = sum over in-edges (j, r) of alpha_r / |N_i| * h_j W_neighbor
//   beta = sigmoid([u_c, u_n] W_gate + b_gate)        (elementwise, d_out)
//   h_i' = act(u_c * beta + u_n * (1 - beta))
// where |N_i| counts every in-edge of i, synthetic similarity edges included.

#include <cstdint>
#include <span>
#include <vector>

#include "ckg/autodiff.hpp"
#include "ckg/features.hpp"
#include "ckg/store.hpp"
#include "ckg/tensor.hpp"

namespace ckg {

enum class Activation { Tanh, Relu };

enum class EncoderMode {
  Gated,   // full layer
  NoGate,  // beta fixed at 0.5
  Mlp      // act(h W_self); neighbours ignored
};

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t hidden_dim = 500;
  std::size_t input_dim = 0;
  Activation activation = Activation::Tanh;
  EncoderMode mode = EncoderMode::Gated;
};

struct GrGcnLayerParams {
  Tensor w_self;      // [d_in, d_out]
  Tensor w_neighbor;  // [d_in, d_out]
  Tensor alpha;       // [num_relations, 1]
  Tensor w_gate;      // [2 d_out, d_out]
  Tensor b_gate;      // [1, d_out]

  std::size_t in_dim() const { return w_self.dim(0); }
  std::size_t out_dim() const { return w_self.dim(1); }
};

// Flattened in-edges of a (sub)graph, in target-major order, with local node
// ids and the 1/|N_target| normaliser per edge.
struct EdgeIndex {
  std::size_t num_nodes = 0;
  std::size_t num_relations = 0;
  std::vector<std::uint32_t> source;
  std::vector<std::uint32_t> target;
  std::vector<std::uint32_t> relation;
  std::vector<double> norm;

  static EdgeIndex from_graph(const MultiGraph& graph);
  // Induced subgraph on `nodes` (local id = position in `nodes`); only edges
  // with both endpoints inside are kept and |N_i| is recounted.
  static EdgeIndex from_subgraph(const MultiGraph& graph, std::span<const std::uint32_t> nodes);
};

struct LayerVars {
  ad::Var w_self, w_neighbor, alpha, w_gate, b_gate;
};

LayerVars bind_layer(ad::Tape& tape, const GrGcnLayerParams& params, bool trainable);

ad::Var layer_forward(const EdgeIndex& edges, ad::Var h, const LayerVars& layer, Activation activation,
                      EncoderMode mode = EncoderMode::Gated);
ad::Var encode(const EdgeIndex& edges, ad::Var features, std::span<const LayerVars> layers,
               const EncoderConfig& config);

// Value-level conveniences (no gradients).
Tensor layer_forward(const MultiGraph& graph, const Tensor& h, const GrGcnLayerParams& params,
                     Activation activation, EncoderMode mode = EncoderMode::Gated);
Tensor encode(const MultiGraph& graph, const Tensor& features, std::span<const GrGcnLayerParams> params,
              const EncoderConfig& config);
Tensor encode(const MultiGraph& graph, const FeatureMatrix& features, std::span<const GrGcnLayerParams> params,
              const EncoderConfig& config);

Tensor features_tensor(const FeatureMatrix& features);

// Glorot-uniform weights, alpha = 1, gate bias = 0; deterministic per seed.
std::vector<GrGcnLayerParams> init_encoder_params(const EncoderConfig& config, std::size_t num_relations,
                                                  std::uint64_t seed);

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, std::uint64_t seed);

}  // namespace ckg
