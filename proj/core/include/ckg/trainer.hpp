#pragma once

// KvsAll training: node-sampled subgraph epochs, encoder -> decoder forward,
// label-smoothed BCE over every (query, candidate) cell, Adam updates,
// periodic densification, plateau LR halving and best-MRR checkpointing.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ckg/checkpoint.hpp"
#include "ckg/config.hpp"
#include "ckg/encoder.hpp"
#include "ckg/evaluator.hpp"
#include "ckg/model.hpp"
#include "ckg/optim.hpp"
#include "ckg/store.hpp"

namespace ckg {

struct Query {
  EntityId head = 0;
  RelationId relation = 0;
  std::vector<EntityId> positives;  // sorted
};

// One query per distinct (h, r); with inverses also one per (t, r + R).
std::vector<Query> kvsall_pairs(const TripletSet& train, bool with_inverse);

struct EpochSample {
  std::vector<EntityId> nodes;  // sorted global ids; local id = position
  EdgeIndex edges;              // induced subgraph in local ids
  std::vector<Query> queries;   // local ids, positives restricted to nodes
};

// Draws min(sample_size, |universe|) nodes uniformly without replacement
// from `universe` using a generator seeded by (seed, epoch).
EpochSample sample_epoch_subgraph(const MultiGraph& graph, std::span<const Query> queries,
                                  std::span<const EntityId> universe, std::size_t sample_size, std::uint64_t seed,
                                  std::uint64_t epoch);

// Rows = queries, columns = candidates: 1 - eps on positives, eps / C elsewhere.
Tensor label_matrix(std::span<const Query> batch, std::size_t num_candidates, double label_smoothing);

// One optimisation step on a batch of local queries. Returns the pre-update loss.
double train_step(std::span<const Query> batch, const EpochSample& sample, const Tensor& sample_features,
                  Model& model, OptimizerState& optimizer, const TrainConfig& config,
                  std::mt19937_64* dropout_rng);

// Halves the learning rate after `patience` consecutive non-improving checks.
class PlateauHalving {
 public:
  explicit PlateauHalving(std::size_t patience) : patience_(patience) {}
  // Returns true when `metric` improved on the best value so far.
  bool observe(double metric, double& lr);
  double best() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t bad_ = 0;
  double best_ = -1.0;
};

struct LogRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  std::optional<double> val_mrr;
};

std::string format_log_record(const LogRecord& r);

struct FitOptions {
  std::function<void(const LogRecord&)> on_log;
  // Written on every validation improvement when set.
  std::optional<std::filesystem::path> checkpoint_path;
};

struct FitResult {
  Model best_model;
  Checkpoint best_checkpoint;
  double best_val_mrr = -1.0;
  Model final_model;
  std::vector<LogRecord> log;
};

// `features` is [|V|, F] aligned with the bundle's entity table.
FitResult fit(const SplitBundle& splits, const Tensor& features, const RunConfig& config,
              const FitOptions& options = {});

}  // namespace ckg
