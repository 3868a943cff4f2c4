#include "ckg/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "ckg/error.hpp"

namespace ckg {

ModelConfig RunConfig::model_config(std::size_t input_dim, std::size_t num_base_relations) const {
  ModelConfig m;
  m.encoder = encoder;
  m.encoder.input_dim = input_dim;
  m.decoder = decoder;
  m.decoder.dim = encoder.hidden_dim;
  m.num_base_relations = num_base_relations;
  return m;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("invalid value '" + v + "' for " + key + " (expected a non-negative integer)");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size())
    throw ConfigError("invalid value '" + v + "' for " + key + " (expected a number)");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("invalid value '" + v + "' for " + key + " (expected true|false)");
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Entry {
  const char* key;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define CKG_SIZE(name, field)                                                                              \
  Entry{name, [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_size(k, v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }}
#define CKG_DOUBLE(name, field)                                                                              \
  Entry{name, [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_double(k, v); }, \
        [](const RunConfig& c) { return fmt_double(c.field); }}
#define CKG_BOOL(name, field)                                                                              \
  Entry{name, [](RunConfig& c, const std::string& k, const std::string& v) { c.field = parse_bool(k, v); }, \
        [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      CKG_SIZE("epochs", train.epochs),
      CKG_SIZE("batch_size", train.batch_size),
      CKG_DOUBLE("lr", train.lr),
      CKG_SIZE("patience", train.patience),
      CKG_SIZE("sample_size", train.sample_size),
      CKG_DOUBLE("label_smoothing", train.label_smoothing),
      Entry{"seed",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              std::uint64_t s = 0;
              auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
              if (ec != std::errc() || p != v.data() + v.size())
                throw ConfigError("invalid value '" + v + "' for " + k + " (expected an unsigned integer)");
              c.train.seed = s;
            },
            [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      CKG_SIZE("val_interval", train.val_interval),
      CKG_DOUBLE("min_lr", train.min_lr),
      CKG_BOOL("f32_storage", train.f32_storage),
      CKG_SIZE("layers", encoder.layers),
      CKG_SIZE("dim", encoder.hidden_dim),
      Entry{"activation",
            [](RunConfig& c, const std::string&, const std::string& v) { c.encoder.activation = parse_activation(v); },
            [](const RunConfig& c) { return to_string(c.encoder.activation); }},
      Entry{"encoder",
            [](RunConfig& c, const std::string&, const std::string& v) { c.encoder.mode = parse_encoder_mode(v); },
            [](const RunConfig& c) { return to_string(c.encoder.mode); }},
      CKG_SIZE("kernels", decoder.kernels),
      CKG_SIZE("kernel_width", decoder.kernel_width),
      CKG_DOUBLE("input_dropout", decoder.input_dropout),
      CKG_DOUBLE("feature_dropout", decoder.feature_dropout),
      CKG_DOUBLE("projection_dropout", decoder.projection_dropout),
      CKG_BOOL("shuffle", decoder.shuffle),
      Entry{"densifier",
            [](RunConfig& c, const std::string&, const std::string& v) { c.densifier.mode = parse_densifier_mode(v); },
            [](const RunConfig& c) { return to_string(c.densifier.mode); }},
      CKG_SIZE("m", densifier.m),
      CKG_SIZE("densify_period", densifier.period),
      CKG_DOUBLE("gs_threshold", densifier.threshold),
      CKG_SIZE("fn_neighbors", densifier.fixed_neighbors),
      CKG_SIZE("threads", threads),
  };
  return table;
}

#undef CKG_SIZE
#undef CKG_DOUBLE
#undef CKG_BOOL

}  // namespace

void validate_config(const RunConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(c.train.batch_size >= 1, "batch_size must be >= 1");
  require(c.train.lr > 0.0, "lr must be positive");
  require(c.train.patience >= 1, "patience must be >= 1");
  require(c.train.sample_size >= 1, "sample_size must be >= 1");
  require(c.train.label_smoothing >= 0.0 && c.train.label_smoothing < 0.5, "label_smoothing must lie in [0, 0.5)");
  require(c.train.val_interval >= 1, "val_interval must be >= 1");
  require(c.encoder.layers >= 1, "layers must be >= 1");
  require(c.encoder.hidden_dim >= 1, "dim must be >= 1");
  require(c.decoder.kernels >= 1, "kernels must be >= 1");
  require(c.decoder.kernel_width >= 1 && c.decoder.kernel_width <= c.encoder.hidden_dim,
          "kernel_width must lie in [1, dim]");
  for (double p : {c.decoder.input_dropout, c.decoder.feature_dropout, c.decoder.projection_dropout})
    require(p >= 0.0 && p < 1.0, "dropout rates must lie in [0, 1)");
  require(c.densifier.period >= 1, "densify_period must be >= 1");
  require(c.threads >= 1, "threads must be >= 1");
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& e : entries())
    if (key == e.key) {
      e.set(config, key, value);
      return;
    }
  throw ConfigError("unknown configuration key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> config_items(const RunConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : entries()) out.emplace_back(e.key, e.get(config));
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& e : entries()) out.emplace_back(e.key);
  return out;
}

void apply_config_text(RunConfig& config, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key=value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    try {
      set_config_value(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  validate_config(config);
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(base, ss.str(), path.string());
  return base;
}

}  // namespace ckg
