#pragma once

// Flat key=value run configuration. Precedence: defaults < file < flags.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ckg/densifier.hpp"
#include "ckg/model.hpp"

namespace ckg {

struct TrainConfig {
  std::size_t epochs = 1000;
  std::size_t batch_size = 256;
  double lr = 3e-4;
  std::size_t patience = 3;          // non-improving validations before halving
  std::size_t sample_size = 50000;   // nodes per epoch
  double label_smoothing = 0.1;
  std::uint64_t seed = 0;
  std::size_t val_interval = 10;     // epochs between validations
  double min_lr = 1e-6;
  bool f32_storage = false;
};

struct RunConfig {
  TrainConfig train;
  EncoderConfig encoder;      // input_dim is taken from the feature file
  DecoderConfig decoder;      // dim follows encoder.hidden_dim
  DensifierConfig densifier;
  std::size_t threads = 1;

  ModelConfig model_config(std::size_t input_dim, std::size_t num_base_relations) const;
};

// Sets one key from its textual value. Throws ConfigError for unknown keys
// or unparsable values.
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

// Throws ConfigError when a value is out of range.
void validate_config(const RunConfig& config);

// Every key with its current value, in a fixed order.
std::vector<std::pair<std::string, std::string>> config_items(const RunConfig& config);
std::vector<std::string> config_keys();

// Applies `key=value` lines ('#' comments and blank lines allowed) on top of
// `config`.
void apply_config_text(RunConfig& config, const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

}  // namespace ckg
