#include "ckg/encoder.hpp"

#include <cmath>
#include <random>
#include <unordered_map>

#include "ckg/error.hpp"

namespace ckg {

EdgeIndex EdgeIndex::from_graph(const MultiGraph& graph) {
  EdgeIndex idx;
  idx.num_nodes = graph.num_nodes();
  idx.num_relations = graph.num_relations();
  idx.source.reserve(graph.num_edges());
  for (std::uint32_t i = 0; i < graph.num_nodes(); ++i) {
    const auto edges = graph.in_edges(i);
    const double norm = edges.empty() ? 0.0 : 1.0 / static_cast<double>(edges.size());
    for (const auto& e : edges) {
      idx.source.push_back(e.source);
      idx.target.push_back(i);
      idx.relation.push_back(e.relation);
      idx.norm.push_back(norm);
    }
  }
  return idx;
}

EdgeIndex EdgeIndex::from_subgraph(const MultiGraph& graph, std::span<const std::uint32_t> nodes) {
  constexpr std::uint32_t kAbsent = ~std::uint32_t{0};
  std::vector<std::uint32_t> local(graph.num_nodes(), kAbsent);
  for (std::uint32_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k] >= graph.num_nodes()) throw ContractError("from_subgraph: node id out of range");
    local[nodes[k]] = k;
  }
  EdgeIndex idx;
  idx.num_nodes = nodes.size();
  idx.num_relations = graph.num_relations();
  for (std::uint32_t k = 0; k < nodes.size(); ++k) {
    const std::size_t first = idx.source.size();
    for (const auto& e : graph.in_edges(nodes[k])) {
      if (local[e.source] == kAbsent) continue;
      idx.source.push_back(local[e.source]);
      idx.target.push_back(k);
      idx.relation.push_back(e.relation);
    }
    const std::size_t count = idx.source.size() - first;
    idx.norm.insert(idx.norm.end(), count, count ? 1.0 / static_cast<double>(count) : 0.0);
  }
  return idx;
}

LayerVars bind_layer(ad::Tape& tape, const GrGcnLayerParams& p, bool trainable) {
  auto leaf = [&](const Tensor& t) { return trainable ? tape.variable(t) : tape.constant(t); };
  return {leaf(p.w_self), leaf(p.w_neighbor), leaf(p.alpha), leaf(p.w_gate), leaf(p.b_gate)};
}

namespace {

ad::Var activate(ad::Var x, Activation a) { return a == Activation::Tanh ? ad::tanh(x) : ad::relu(x); }

}  // namespace

ad::Var layer_forward(const EdgeIndex& edges, ad::Var h, const LayerVars& layer, Activation activation,
                      EncoderMode mode) {
  auto& tape = h.tape();
  if (h.value().rank() != 2 || h.value().dim(0) != edges.num_nodes)
    throw ContractError("layer_forward: embedding rows do not match graph nodes");
  if (layer.alpha.value().dim(0) < edges.num_relations)
    throw ConfigError("layer_forward: no alpha for relation id " + std::to_string(layer.alpha.value().dim(0)));

  ad::Var u_c = ad::matmul(h, layer.w_self);
  if (mode == EncoderMode::Mlp) return activate(u_c, activation);

  const std::size_t d_out = u_c.value().dim(1);
  ad::Var transformed = ad::matmul(h, layer.w_neighbor);
  ad::Var messages = ad::gather_rows(transformed, edges.source);
  ad::Var norm = tape.constant(Tensor(Shape{edges.norm.size(), 1}, edges.norm));
  ad::Var coef = ad::mul(ad::gather_rows(layer.alpha, edges.relation), norm);
  ad::Var u_n = ad::scatter_add_rows(ad::scale_rows(messages, coef), edges.target, edges.num_nodes);

  ad::Var mixed;
  if (mode == EncoderMode::NoGate) {
    mixed = ad::scalar_mul(ad::add(u_c, u_n), 0.5);
  } else {
    const ad::Var both[] = {u_c, u_n};
    ad::Var beta = ad::sigmoid(ad::add_bias(ad::matmul(ad::concat(both, 1), layer.w_gate), layer.b_gate));
    ad::Var ones = tape.constant(Tensor(Shape{edges.num_nodes, d_out}, 1.0));
    ad::Var one_minus_beta = ad::add(ones, ad::scalar_mul(beta, -1.0));
    mixed = ad::add(ad::mul(u_c, beta), ad::mul(u_n, one_minus_beta));
  }
  return activate(mixed, activation);
}

ad::Var encode(const EdgeIndex& edges, ad::Var features, std::span<const LayerVars> layers,
               const EncoderConfig& config) {
  if (layers.empty()) throw ContractError("encode: no layers");
  if (features.value().rank() != 2 || features.value().dim(1) != layers[0].w_self.value().dim(0))
    throw ContractError("encode: feature dim " + std::to_string(features.value().dim(1)) +
                        " does not match first layer input dim " + std::to_string(layers[0].w_self.value().dim(0)));
  ad::Var h = features;
  for (const auto& layer : layers) h = layer_forward(edges, h, layer, config.activation, config.mode);
  return h;
}

Tensor layer_forward(const MultiGraph& graph, const Tensor& h, const GrGcnLayerParams& params,
                     Activation activation, EncoderMode mode) {
  ad::Tape tape;
  const auto edges = EdgeIndex::from_graph(graph);
  const auto vars = bind_layer(tape, params, false);
  return layer_forward(edges, tape.constant(h), vars, activation, mode).value();
}

Tensor encode(const MultiGraph& graph, const Tensor& features, std::span<const GrGcnLayerParams> params,
              const EncoderConfig& config) {
  ad::Tape tape;
  const auto edges = EdgeIndex::from_graph(graph);
  std::vector<LayerVars> layers;
  for (const auto& p : params) layers.push_back(bind_layer(tape, p, false));
  return encode(edges, tape.constant(features), layers, config).value();
}

Tensor features_tensor(const FeatureMatrix& features) {
  return Tensor(Shape{features.rows(), features.dim()}, features.to_f64());
}

Tensor encode(const MultiGraph& graph, const FeatureMatrix& features, std::span<const GrGcnLayerParams> params,
              const EncoderConfig& config) {
  if (features.rows() != graph.num_nodes()) throw ContractError("encode: feature rows do not match graph nodes");
  return encode(graph, features_tensor(features), params, config);
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, std::uint64_t seed) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape), 0.0);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

std::vector<GrGcnLayerParams> init_encoder_params(const EncoderConfig& config, std::size_t num_relations,
                                                  std::uint64_t seed) {
  if (config.layers == 0 || config.hidden_dim == 0 || config.input_dim == 0)
    throw ContractError("init_encoder_params: layers and dims must be >= 1");
  std::seed_seq seq{seed, std::uint64_t{0x67726763}};
  std::mt19937_64 seeder(seq);
  std::vector<GrGcnLayerParams> layers;
  std::size_t d_in = config.input_dim;
  const std::size_t d = config.hidden_dim;
  for (std::size_t l = 0; l < config.layers; ++l) {
    GrGcnLayerParams p;
    p.w_self = glorot_uniform({d_in, d}, d_in, d, seeder());
    p.w_neighbor = glorot_uniform({d_in, d}, d_in, d, seeder());
    p.alpha = Tensor(Shape{num_relations, 1}, 1.0);
    p.w_gate = glorot_uniform({2 * d, d}, 2 * d, d, seeder());
    p.b_gate = Tensor(Shape{1, d}, 0.0);
    layers.push_back(std::move(p));
    d_in = d;
  }
  return layers;
}

}  // namespace ckg
