#pragma once

// Encoder + decoder bundle and its checkpoint mapping.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ckg/autodiff.hpp"
#include "ckg/checkpoint.hpp"
#include "ckg/decoder.hpp"
#include "ckg/encoder.hpp"

namespace ckg {

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  std::size_t num_base_relations = 0;

  std::size_t num_relations() const { return 2 * num_base_relations + 1; }
};

struct Model {
  ModelConfig config;
  std::vector<GrGcnLayerParams> encoder;
  DecoderParams decoder;
  std::vector<std::string> relation_names;

  static Model init(const ModelConfig& config, std::uint64_t seed);

  // Trainable tensors in canonical order, with matching names.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::vector<std::string> parameter_names() const;
};

struct ModelVars {
  std::vector<LayerVars> encoder;
  DecoderVars decoder;

  // Same order as Model::parameters().
  std::vector<ad::Var> flat() const;
};

ModelVars bind_model(ad::Tape& tape, const Model& model, bool trainable);

// Inference-mode node embeddings of `graph`.
Tensor embed_nodes(const Model& model, const MultiGraph& graph, const Tensor& features);

// Extra key/value pairs are recorded verbatim under "train" in the manifest.
Checkpoint to_checkpoint(const Model& model, const OptimizerState* optimizer,
                         const std::vector<std::pair<std::string, std::string>>& extra = {});
Model model_from_checkpoint(const Checkpoint& ckpt);

std::string to_string(Activation a);
std::string to_string(EncoderMode m);
Activation parse_activation(const std::string& s);
EncoderMode parse_encoder_mode(const std::string& s);

}  // namespace ckg
