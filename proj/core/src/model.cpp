#include "ckg/model.hpp"

#include <json.hpp>

#include "ckg/error.hpp"

namespace ckg {

Model Model::init(const ModelConfig& config, std::uint64_t seed) {
  if (config.decoder.dim != config.encoder.hidden_dim)
    throw ContractError("Model::init: decoder dim must equal encoder hidden dim");
  std::seed_seq seq{seed};
  std::mt19937_64 seeder(seq);
  Model m;
  m.config = config;
  m.encoder = init_encoder_params(config.encoder, config.num_relations(), seeder());
  m.decoder = init_decoder_params(config.decoder, config.num_relations(), seeder());
  return m;
}

std::vector<Tensor*> Model::parameters() {
  std::vector<Tensor*> out;
  for (auto& l : encoder)
    for (Tensor* t : {&l.w_self, &l.w_neighbor, &l.alpha, &l.w_gate, &l.b_gate}) out.push_back(t);
  for (Tensor* t : {&decoder.relations, &decoder.kernels, &decoder.projection}) out.push_back(t);
  return out;
}

std::vector<const Tensor*> Model::parameters() const {
  auto mutable_ptrs = const_cast<Model*>(this)->parameters();
  return {mutable_ptrs.begin(), mutable_ptrs.end()};
}

std::vector<std::string> Model::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < encoder.size(); ++l)
    for (const char* n : {"w_self", "w_neighbor", "alpha", "w_gate", "b_gate"})
      names.push_back("encoder." + std::to_string(l) + "." + n);
  for (const char* n : {"decoder.relations", "decoder.kernels", "decoder.projection"}) names.emplace_back(n);
  return names;
}

std::vector<ad::Var> ModelVars::flat() const {
  std::vector<ad::Var> out;
  for (const auto& l : encoder)
    for (const auto& v : {l.w_self, l.w_neighbor, l.alpha, l.w_gate, l.b_gate}) out.push_back(v);
  for (const auto& v : {decoder.relations, decoder.kernels, decoder.projection}) out.push_back(v);
  return out;
}

ModelVars bind_model(ad::Tape& tape, const Model& model, bool trainable) {
  ModelVars vars;
  for (const auto& l : model.encoder) vars.encoder.push_back(bind_layer(tape, l, trainable));
  vars.decoder = bind_decoder(tape, model.decoder, trainable);
  return vars;
}

Tensor embed_nodes(const Model& model, const MultiGraph& graph, const Tensor& features) {
  return encode(graph, features, model.encoder, model.config.encoder);
}

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

std::string to_string(EncoderMode m) {
  switch (m) {
    case EncoderMode::Gated: return "gated";
    case EncoderMode::NoGate: return "no-gate";
    case EncoderMode::Mlp: return "mlp";
  }
  return "gated";
}

Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  throw ConfigError("unknown activation '" + s + "' (expected tanh|relu)");
}

EncoderMode parse_encoder_mode(const std::string& s) {
  if (s == "gated") return EncoderMode::Gated;
  if (s == "no-gate") return EncoderMode::NoGate;
  if (s == "mlp") return EncoderMode::Mlp;
  throw ConfigError("unknown encoder mode '" + s + "' (expected gated|no-gate|mlp)");
}

Checkpoint to_checkpoint(const Model& model, const OptimizerState* optimizer,
                         const std::vector<std::pair<std::string, std::string>>& extra) {
  Checkpoint ckpt;
  const auto names = model.parameter_names();
  const auto tensors = model.parameters();
  for (std::size_t i = 0; i < names.size(); ++i) ckpt.params.push_back({names[i], *tensors[i]});
  ckpt.int_arrays.emplace_back("decoder.perm_head", model.decoder.perm_head);
  ckpt.int_arrays.emplace_back("decoder.perm_relation", model.decoder.perm_relation);
  if (optimizer) ckpt.optimizer = *optimizer;

  const auto& c = model.config;
  nlohmann::ordered_json j;
  j["format"] = "ckg-model";
  j["optimizer"] = "adam";
  j["encoder"] = {{"layers", c.encoder.layers},
                  {"hidden_dim", c.encoder.hidden_dim},
                  {"input_dim", c.encoder.input_dim},
                  {"activation", to_string(c.encoder.activation)},
                  {"mode", to_string(c.encoder.mode)}};
  j["decoder"] = {{"dim", c.decoder.dim},
                  {"kernels", c.decoder.kernels},
                  {"kernel_width", c.decoder.kernel_width},
                  {"input_dropout", c.decoder.input_dropout},
                  {"feature_dropout", c.decoder.feature_dropout},
                  {"projection_dropout", c.decoder.projection_dropout},
                  {"shuffle", c.decoder.shuffle}};
  j["num_base_relations"] = c.num_base_relations;
  j["relation_names"] = model.relation_names;
  nlohmann::ordered_json train = nlohmann::ordered_json::object();
  for (const auto& [k, v] : extra) train[k] = v;
  j["train"] = train;
  ckpt.manifest_json = j.dump(2);
  return ckpt;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ckpt.manifest_json);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what());
  }
  Model m;
  try {
    auto& c = m.config;
    const auto& enc = j.at("encoder");
    c.encoder.layers = enc.at("layers").get<std::size_t>();
    c.encoder.hidden_dim = enc.at("hidden_dim").get<std::size_t>();
    c.encoder.input_dim = enc.at("input_dim").get<std::size_t>();
    c.encoder.activation = parse_activation(enc.at("activation").get<std::string>());
    c.encoder.mode = parse_encoder_mode(enc.at("mode").get<std::string>());
    const auto& dec = j.at("decoder");
    c.decoder.dim = dec.at("dim").get<std::size_t>();
    c.decoder.kernels = dec.at("kernels").get<std::size_t>();
    c.decoder.kernel_width = dec.at("kernel_width").get<std::size_t>();
    c.decoder.input_dropout = dec.at("input_dropout").get<double>();
    c.decoder.feature_dropout = dec.at("feature_dropout").get<double>();
    c.decoder.projection_dropout = dec.at("projection_dropout").get<double>();
    c.decoder.shuffle = dec.at("shuffle").get<bool>();
    c.num_base_relations = j.at("num_base_relations").get<std::size_t>();
    m.relation_names = j.at("relation_names").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what());
  }
  m.encoder.resize(m.config.encoder.layers);
  const auto names = m.parameter_names();
  const auto tensors = m.parameters();
  for (std::size_t i = 0; i < names.size(); ++i) *tensors[i] = ckpt.param(names[i]).value;
  m.decoder.perm_head = ckpt.int_array("decoder.perm_head");
  m.decoder.perm_relation = ckpt.int_array("decoder.perm_relation");
  return m;
}

}  // namespace ckg
