#pragma once

// Binary model checkpoints ("CKGM").
//
// Layout (little-endian): magic "CKGM", u32 version, u64 parameter count,
// then per parameter {u32 name length, name, u32 rank, u64 dims[rank],
// f64 values}; u64 integer-array count, per array {u32 name length, name,
// u64 length, u32 values}; u8 optimizer flag followed, when set, by the
// Adam hyperparameters (4 x f64), u64 step and the first/second moments in
// parameter order; finally u64 manifest length and the manifest text.
// save_checkpoint also writes the manifest next to the file as
// "<path>.json".

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ckg/optim.hpp"

namespace ckg {

struct Checkpoint {
  ParamSet params;
  std::vector<std::pair<std::string, std::vector<std::uint32_t>>> int_arrays;
  std::optional<OptimizerState> optimizer;
  std::string manifest_json;

  const Parameter& param(const std::string& name) const;
  const std::vector<std::uint32_t>& int_array(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ckg
