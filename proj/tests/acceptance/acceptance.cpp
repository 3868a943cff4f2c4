// Acceptance run. Prints one PASS/FAIL line per criterion with the measured
// value, the pinned tolerance and the wall time, and exits non-zero when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ckg/densifier.hpp"
#include "ckg/evaluator.hpp"
#include "ckg/parallel.hpp"
#include "ckg/trainer.hpp"
#include "cli.hpp"
#include "grad_suite.hpp"
#include "oracles.hpp"
#include "toy_kg.hpp"

namespace {

using namespace ckg;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string measured;
  std::string tolerance;
};

int failures = 0;

void criterion(const std::string& name, double time_limit_s, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what(), o.tolerance};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  const bool in_time = secs < time_limit_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("%s  %-22s measured: %s | required: %s | time %.1fs (limit %.0fs)\n", pass ? "PASS" : "FAIL",
              name.c_str(), o.measured.c_str(), o.tolerance.c_str(), secs, time_limit_s);
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// ---------------------------------------------------------------- gradients

Outcome gradient_suite() {
  double worst = 0.0;
  std::string worst_name;
  for (const auto& r : testing::primitive_grad_suite(20))
    if (r.max_error >= worst) {
      worst = r.max_error;
      worst_name = r.name;
    }
  double pipeline = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) pipeline = std::max(pipeline, testing::pipeline_grad_error(seed));
  return {std::max(worst, pipeline) <= 1e-4,
          "primitives max " + fmt("%.3g", worst) + " (" + worst_name + "), pipeline max " + fmt("%.3g", pipeline),
          "max relative error <= 1e-4, 20 seeds per primitive"};
}

// ---------------------------------------------------------------- densifier

Outcome densifier_exactness() {
  std::size_t mismatched = 0, floor_violations = 0, touched_high = 0, not_idempotent = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed * 7919 + 1);
    const std::size_t n = 2 + rng() % 499, m = 1 + rng() % 10;
    const auto set = testing::random_triplets(n, 1 + rng() % 5, 1 + rng() % (4 * n), seed);
    const auto g = build_graph(set, true);
    const Tensor emb = testing::random_tensor({n, 2 + rng() % 16}, seed + 1000);
    const auto edges = densify(g, emb, m);

    std::vector<std::pair<std::uint32_t, std::uint32_t>> got;
    std::vector<std::size_t> deg(n);
    for (std::uint32_t i = 0; i < n; ++i) deg[i] = g.degree(i);
    for (const auto& e : edges.edges) {
      got.emplace_back(e.source, e.target);
      ++deg[e.target];
    }
    if (got != testing::naive_densify(g, emb, m)) ++mismatched;
    for (std::uint32_t i = 0; i < n; ++i) {
      if (deg[i] < std::min(m, n - 1)) ++floor_violations;
      if (g.degree(i) >= m && deg[i] != g.degree(i)) ++touched_high;
    }
    const auto again = densify(g.with_synthetic(edges), emb, m);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> re;
    for (const auto& e : again.edges) re.emplace_back(e.source, e.target);
    if (re != got) ++not_idempotent;
  }
  const bool ok = mismatched + floor_violations + touched_high + not_idempotent == 0;
  return {ok,
          "50 graphs: oracle mismatches " + std::to_string(mismatched) + ", degree-floor violations " +
              std::to_string(floor_violations) + ", saturated nodes touched " + std::to_string(touched_high) +
              ", non-idempotent " + std::to_string(not_idempotent),
          "all zero"};
}

// ---------------------------------------------------------------- ranking

Outcome ranking_oracle() {
  std::size_t mismatches = 0;
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = 1 + rng() % 200;
    std::vector<double> s(c);
    const std::size_t levels = 1 + rng() % 12;
    for (auto& v : s) v = static_cast<double>(rng() % levels) - 3.0;
    const auto gold = static_cast<std::uint32_t>(rng() % c);
    std::vector<std::uint32_t> filt;
    for (std::uint32_t j = 0; j < c; ++j)
      if (rng() % 5 == 0) filt.push_back(j);
    if (filtered_rank(s, gold, filt) != testing::naive_rank(s, gold, filt)) ++mismatches;
  }
  const double m = mrr(std::vector<double>{1, 2, 4});
  const bool hand = std::fabs(m - 0.58333333333333333) <= 1e-9 && hits_at(std::vector<double>{3, 11}, 10) == 0.5 &&
                    hits_at(std::vector<double>{1, 2, 4}, 3) == 2.0 / 3.0 &&
                    filtered_rank(std::vector<double>(9, 0.0), 4, {}) == 5.0;
  return {mismatches == 0 && hand,
          std::to_string(mismatches) + " mismatches in 100 instances; MRR[1,2,4] = " + fmt("%.12f", m),
          "exact rank equality; MRR 0.583333 +- 1e-9"};
}

// ---------------------------------------------------------------- training helpers

RunConfig overfit_config() {
  RunConfig c;
  c.encoder.layers = 2;
  c.encoder.hidden_dim = 32;
  c.decoder.kernels = 32;
  c.decoder.kernel_width = 3;
  c.densifier.period = 50;
  c.train.epochs = 500;
  c.train.batch_size = 64;
  c.train.lr = 0.003;
  c.train.sample_size = 1000;
  c.train.val_interval = 25;
  c.train.seed = 1;
  return c;
}

testing::ToyKg overfit_fixture() {
  testing::ToySpec spec;
  spec.entities = 30;
  spec.relations = 4;
  spec.train = 100;
  spec.feature_dim = 16;
  return testing::make_toy_kg(spec);
}

double train_set_mrr(const Model& model, const SplitBundle& b, const Tensor& features, const DensifierConfig& dc) {
  const TripletSet* sets[] = {&b.train};
  const KnownSet known(b.train.num_relations(), sets);
  return evaluate(model, b.train, known, build_graph(b.train, true), features, dc).mrr;
}

Outcome toy_overfit() {
  auto kg = overfit_fixture();
  kg.bundle.valid = kg.bundle.train;
  const auto cfg = overfit_config();
  const auto res = fit(kg.bundle, kg.features, cfg);
  const double final_mrr = train_set_mrr(res.best_model, kg.bundle, kg.features, cfg.densifier);
  double loss10 = res.log.size() >= 10 ? res.log[9].loss : res.log.back().loss;
  const double base = std::log(2.0);
  const bool ok = final_mrr >= 0.9 && loss10 < base;
  return {ok,
          "train MRR " + fmt("%.4f", final_mrr) + " after " + std::to_string(res.log.size()) + " epochs; loss at epoch 10 " +
              fmt("%.4f", loss10) + " (first epoch " + fmt("%.4f", res.log.front().loss) + ")",
          "MRR >= 0.9 within 500 epochs; epoch-10 loss < ln 2 = 0.6931"};
}

// ---------------------------------------------------------------- inductive

Outcome inductive_smoke() {
  testing::ToySpec spec;
  spec.entities = 36;
  spec.relations = 4;
  spec.clusters = 6;
  spec.train = 120;
  spec.valid = 12;
  spec.held_out = 6;
  spec.test_per_held_out = 3;
  spec.seed = 5;
  const auto kg = testing::make_toy_kg(spec);
  auto cfg = overfit_config();
  cfg.train.epochs = 200;
  cfg.train.val_interval = 10;
  const auto res = fit(kg.bundle, kg.features, cfg);

  const TripletSet* sets[] = {&kg.bundle.train, &kg.bundle.valid, &kg.bundle.test};
  const KnownSet known(spec.relations, sets);
  const auto g = build_graph(kg.bundle.train, true);
  const auto two = evaluate(res.best_model, kg.bundle.test, known, g, kg.features, cfg.densifier, true);
  DensifierConfig single = cfg.densifier;
  single.mode = DensifierMode::None;
  const auto one = evaluate(res.best_model, kg.bundle.test, known, g, kg.features, single, true);

  // Uniform ranking among the unfiltered candidates of each query.
  double random_mrr = 0.0;
  const std::size_t base = spec.relations;
  for (const auto& q : two.queries) {
    const EntityId h = q.inverse ? q.triplet.tail : q.triplet.head;
    const RelationId r = q.inverse ? q.triplet.relation + static_cast<RelationId>(base) : q.triplet.relation;
    const std::size_t filtered = known.answers(h, r).size() - 1;
    random_mrr += testing::expected_random_rr(spec.entities - filtered);
  }
  random_mrr /= static_cast<double>(two.queries.size());

  // Split by whether the answer being ranked is the unseen entity. Isolated
  // single-pass embeddings can sit apart from every trained one, which
  // favours unseen answers regardless of the query.
  const auto split_mrr = [&](const RankReport& rep) {
    double sum[2] = {0, 0};
    std::size_t n[2] = {0, 0};
    for (const auto& q : rep.queries) {
      const EntityId gold = q.inverse ? q.triplet.head : q.triplet.tail;
      const int unseen = std::find(kg.held_out.begin(), kg.held_out.end(), gold) != kg.held_out.end();
      sum[unseen] += 1.0 / q.rank;
      ++n[unseen];
    }
    return "unseen answer " + fmt("%.4f", n[1] ? sum[1] / n[1] : 0.0) + ", seen answer " +
           fmt("%.4f", n[0] ? sum[0] / n[0] : 0.0);
  };

  const bool ok = two.mrr >= 3.0 * random_mrr && one.mrr < two.mrr;
  return {ok,
          "two-pass MRR " + fmt("%.4f", two.mrr) + " (" + split_mrr(two) + "), single-pass " + fmt("%.4f", one.mrr) +
              " (" + split_mrr(one) + "), random " + fmt("%.4f", random_mrr) + " (" +
              std::to_string(two.queries.size()) + " queries)",
          "two-pass >= 3 x random; single-pass < two-pass"};
}

// ---------------------------------------------------------------- CLI ablations

struct CliRun {
  int code = 0;
  std::string out, err;
};

CliRun run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"ckg"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string metric_block(const std::string& out) {
  std::istringstream in(out);
  std::string line, block;
  while (std::getline(in, line))
    if (line.rfind("test\t", 0) == 0) block += line + "\n";
  return block;
}

Outcome ablations() {
  testing::ToySpec spec;
  spec.valid = 10;
  spec.held_out = 3;
  const auto dir = testing::temp_dir("acceptance_ablation");
  testing::write_toy_files(testing::make_toy_kg(spec), dir);
  const std::vector<std::string> common{"train",      "--train",    (dir / "train.tsv").string(),
                                        "--valid",    (dir / "valid.tsv").string(),
                                        "--test",     (dir / "test.tsv").string(),
                                        "--features", (dir / "features.ckgf").string(),
                                        "--entities", (dir / "entities.tsv").string(),
                                        "--epochs",   "20",
                                        "--dim",      "16",
                                        "--layers",   "2",
                                        "--set",      "kernels=8",
                                        "--set",      "val_interval=5",
                                        "--densify-period", "5",
                                        "--lr",       "0.005"};
  struct Variant {
    std::string name;
    std::vector<std::string> flags;
    std::string echo;
  };
  const std::vector<Variant> variants{{"default", {}, "config encoder=gated"},
                                      {"no-gate", {"--no-gate"}, "config encoder=no-gate"},
                                      {"mlp", {"--mlp-encoder"}, "config encoder=mlp"},
                                      {"no-densify", {"--no-densify"}, "config densifier=none"},
                                      {"gs", {"--densifier", "gs"}, "config densifier=gs"},
                                      {"fn", {"--densifier", "fn"}, "config densifier=fn"}};
  std::map<std::string, std::string> metrics;
  std::vector<std::string> problems;
  for (const auto& v : variants) {
    auto args = common;
    args.push_back("--out");
    args.push_back((dir / v.name).string());
    args.insert(args.end(), v.flags.begin(), v.flags.end());
    const auto r = run_cli(args);
    if (r.code != 0) {
      problems.push_back(v.name + " exit " + std::to_string(r.code) + ": " + r.err);
      continue;
    }
    std::ifstream log(dir / v.name / "train.log");
    const std::string log_text((std::istreambuf_iterator<char>(log)), {});
    if (log_text.find(v.echo + "\n") == std::string::npos) problems.push_back(v.name + " echo missing");
    metrics[v.name] = metric_block(r.out);
    if (metrics[v.name].empty()) problems.push_back(v.name + " printed no metrics");
  }
  std::size_t identical_pairs = 0;
  for (auto a = metrics.begin(); a != metrics.end(); ++a)
    for (auto b = std::next(a); b != metrics.end(); ++b)
      if (a->second == b->second) {
        ++identical_pairs;
        problems.push_back(a->first + " == " + b->first);
      }
  std::string measured = std::to_string(metrics.size()) + "/6 variants completed, " +
                         std::to_string(identical_pairs) + " identical metric pairs";
  for (const auto& p : problems) measured += "; " + p;
  return {problems.empty(), measured, "all variants run, echo their toggle, pairwise-distinct metrics"};
}

// ---------------------------------------------------------------- determinism

Outcome determinism() {
  const auto kg = overfit_fixture();
  auto bundle = kg.bundle;
  bundle.valid = bundle.train;
  const auto dir = testing::temp_dir("acceptance_determinism");
  std::vector<std::string> logs;
  for (int run = 0; run < 2; ++run) {
    FitOptions opts;
    opts.checkpoint_path = dir / ("run" + std::to_string(run) + ".ckpt");
    std::ostringstream log;
    opts.on_log = [&](const LogRecord& r) { log << format_log_record(r) << '\n'; };
    fit(bundle, kg.features, overfit_config(), opts);
    logs.push_back(log.str());
  }
  auto bytes = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
  };
  const std::string a = bytes(dir / "run0.ckpt"), b = bytes(dir / "run1.ckpt");
  const bool same_ckpt = !a.empty() && a == b;
  const bool same_log = !logs[0].empty() && logs[0] == logs[1];
  return {same_ckpt && same_log,
          std::string("checkpoints ") + (same_ckpt ? "identical" : "differ") + " (" + std::to_string(a.size()) +
              " bytes), logs " + (same_log ? "identical" : "differ"),
          "bit-identical checkpoints and logs"};
}

}  // namespace

int main() {
  set_num_threads(1);
  criterion("gradient-suite", 120, gradient_suite);
  criterion("densifier-exactness", 60, densifier_exactness);
  criterion("ranking-oracle", 60, ranking_oracle);
  criterion("toy-overfit", 300, toy_overfit);
  criterion("inductive-smoke", 300, inductive_smoke);
  criterion("ablation-toggles", 600, ablations);
  criterion("determinism", 600, determinism);
  std::printf("%s: %d criterion(s) failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
  return failures == 0 ? 0 : 1;
}
