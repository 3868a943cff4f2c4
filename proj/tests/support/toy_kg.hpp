#pragma once

// Synthetic knowledge graphs for tests. Entities fall into clusters; entity
// features are a noisy copy of their cluster centroid and relation r links
// cluster c to cluster (c + r + 1) mod clusters.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ckg/store.hpp"
#include "ckg/tensor.hpp"

namespace ckg::testing {

struct ToySpec {
  std::size_t entities = 30;
  std::size_t relations = 4;
  std::size_t clusters = 5;
  std::size_t train = 100;
  std::size_t valid = 0;
  std::size_t feature_dim = 16;
  double noise = 0.3;
  // The last `held_out` entity ids never occur in train; each gets
  // `test_per_held_out` test triplets whose other endpoint is a train entity.
  std::size_t held_out = 0;
  std::size_t test_per_held_out = 2;
  std::uint64_t seed = 1;
};

struct ToyKg {
  SplitBundle bundle;
  Tensor features;  // [entities, feature_dim]
  std::vector<std::size_t> cluster;
  std::vector<EntityId> held_out;
};

ToyKg make_toy_kg(const ToySpec& spec);

// Writes train/valid/test TSVs, entities.tsv and features.ckgf into `dir`.
void write_toy_files(const ToyKg& kg, const std::filesystem::path& dir);

// A fresh, empty temporary directory unique to `tag`.
std::filesystem::path temp_dir(const std::string& tag);

// Random graph over `nodes` entities and `relations` relation types with
// `edges` distinct random triplets.
TripletSet random_triplets(std::size_t nodes, std::size_t relations, std::size_t edges, std::uint64_t seed);

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0);

}  // namespace ckg::testing
