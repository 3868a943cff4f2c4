#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "ckg/checkpoint.hpp"
#include "ckg/config.hpp"
#include "ckg/densifier.hpp"
#include "ckg/error.hpp"
#include "ckg/evaluator.hpp"
#include "ckg/features.hpp"
#include "ckg/model.hpp"
#include "ckg/parallel.hpp"
#include "ckg/store.hpp"
#include "ckg/trainer.hpp"

namespace ckg::cli {
namespace {

namespace fs = std::filesystem;

TsvFormat parse_format(const std::string& s) {
  if (s == "tsv") return TsvFormat::ThreeColumn;
  if (s == "scored") return TsvFormat::ScoredFourColumn;
  throw ConfigError("unknown format '" + s + "' (expected tsv|scored)");
}

struct DataFlags {
  std::string train, valid, test, features, entities;
  std::string format = "tsv";
};

void add_data_flags(CLI::App* cmd, DataFlags& d, bool need_features) {
  cmd->add_option("--train", d.train, "Training triplets (TSV)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--valid", d.valid, "Validation triplets (TSV)")->check(CLI::ExistingFile);
  cmd->add_option("--test", d.test, "Test triplets (TSV)")->check(CLI::ExistingFile);
  auto* f = cmd->add_option("--features", d.features, "Node feature matrix (CKGF)")->check(CLI::ExistingFile);
  if (need_features) f->required();
  cmd->add_option("--entities", d.entities,
                  "Entity table (id<TAB>text) fixing feature row order; without it, rows follow first "
                  "appearance in train, valid, test")
      ->check(CLI::ExistingFile);
  cmd->add_option("--format", d.format, "Triplet layout: tsv (head rel tail) or scored (rel head tail weight)")
      ->capture_default_str();
}

struct Loaded {
  SplitBundle bundle;
  Tensor features;
};

TripletSet load_split(const std::string& path, TsvFormat format, const std::shared_ptr<Vocabulary>& vocab,
                      bool fixed_entities) {
  if (path.empty()) return TripletSet{vocab, {}, {}};
  const std::size_t before = vocab->entities.size();
  TripletSet set = ingest_triplets(path, format, vocab);
  if (fixed_entities && vocab->entities.size() != before)
    throw DataError(path + ": entity '" + vocab->entities.text(static_cast<EntityId>(before)) +
                    "' is missing from the entity table");
  return set;
}

Loaded load_data(const DataFlags& d, const std::vector<std::string>& relation_names = {}) {
  const TsvFormat format = parse_format(d.format);
  const bool fixed = !d.entities.empty();
  auto vocab = fixed ? read_entity_table(d.entities) : std::make_shared<Vocabulary>();
  for (const auto& r : relation_names) vocab->relations.intern(r);
  Loaded l;
  l.bundle.train = load_split(d.train, format, vocab, fixed);
  l.bundle.valid = load_split(d.valid, format, vocab, fixed);
  l.bundle.test = load_split(d.test, format, vocab, fixed);
  if (!relation_names.empty() && vocab->relations.size() != relation_names.size())
    throw DataError("relation '" + vocab->relations.text(static_cast<RelationId>(relation_names.size())) +
                    "' is unknown to the checkpoint");
  if (!d.features.empty()) l.features = features_tensor(load_features(d.features, vocab->entities.size()));
  return l;
}

// Flags that override configuration keys. Only flags given on the command
// line are applied, so file values survive otherwise.
struct ConfigFlags {
  std::string config_file;
  RunConfig defaults;
  std::uint64_t seed = 0;
  std::size_t m = 0, densify_period = 0, sample_size = 0, threads = 1, epochs = 0, dim = 0, layers = 0,
              batch_size = 0;
  double lr = 0.0;
  std::string densifier;
  bool no_densify = false, no_gate = false, mlp = false;
  std::vector<std::string> set;
  std::vector<std::pair<CLI::Option*, std::string>> keyed;
  CLI::Option* densifier_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& c, bool training) {
  const RunConfig& d = c.defaults;
  c.seed = d.train.seed;
  c.m = d.densifier.m;
  c.densify_period = d.densifier.period;
  c.sample_size = d.train.sample_size;
  c.threads = d.threads;
  c.epochs = d.train.epochs;
  c.dim = d.encoder.hidden_dim;
  c.layers = d.encoder.layers;
  c.batch_size = d.train.batch_size;
  c.lr = d.train.lr;
  if (training) {
    cmd->add_option("--config", c.config_file, "Configuration file of key=value lines")->check(CLI::ExistingFile);
    c.keyed.emplace_back(cmd->add_option("--seed", c.seed, "Seed for all randomness")->capture_default_str(), "seed");
    c.keyed.emplace_back(
        cmd->add_option("--densify-period", c.densify_period, "Epochs between densifier refreshes")
            ->capture_default_str(),
        "densify_period");
    c.keyed.emplace_back(
        cmd->add_option("--sample-size", c.sample_size, "Nodes sampled per epoch")->capture_default_str(),
        "sample_size");
    c.keyed.emplace_back(cmd->add_option("--epochs", c.epochs, "Maximum epochs")->capture_default_str(), "epochs");
    c.keyed.emplace_back(cmd->add_option("--lr", c.lr, "Initial learning rate")->capture_default_str(), "lr");
    c.keyed.emplace_back(cmd->add_option("--dim", c.dim, "Encoder and decoder width")->capture_default_str(), "dim");
    c.keyed.emplace_back(cmd->add_option("--layers", c.layers, "Encoder layers")->capture_default_str(), "layers");
    c.keyed.emplace_back(
        cmd->add_option("--batch-size", c.batch_size, "Queries per batch")->capture_default_str(), "batch_size");
    cmd->add_option("--set", c.set, "Extra configuration override key=value (repeatable)");
    cmd->add_flag("--no-gate", c.no_gate, "Fix the encoder gate at 0.5");
    cmd->add_flag("--mlp-encoder", c.mlp, "Replace graph convolution by a per-node MLP");
  }
  c.keyed.emplace_back(cmd->add_option("--m", c.m, "Target in-degree for densification")->capture_default_str(), "m");
  c.densifier_opt = cmd->add_option("--densifier", c.densifier, "Densifier: ours, gs or fn")
                        ->check(CLI::IsMember({"ours", "gs", "fn"}))
                        ->default_str(to_string(d.densifier.mode));
  cmd->add_flag("--no-densify", c.no_densify, "Disable similarity edges");
  c.threads_opt = cmd->add_option("--threads", c.threads, "Worker threads")->capture_default_str();
}

void apply_flags(RunConfig& config, const ConfigFlags& c) {
  for (const auto& [opt, key] : c.keyed) {
    if (!opt->count()) continue;
    set_config_value(config, key, opt->as<std::string>());
  }
  for (const auto& kv : c.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.densifier_opt && c.densifier_opt->count()) config.densifier.mode = parse_densifier_mode(c.densifier);
  if (c.no_densify) config.densifier.mode = DensifierMode::None;
  if (c.no_gate) config.encoder.mode = EncoderMode::NoGate;
  if (c.mlp) config.encoder.mode = EncoderMode::Mlp;
  if (c.threads_opt && c.threads_opt->count()) config.threads = c.threads;
  validate_config(config);
}

void echo_config(std::ostream& out, const RunConfig& config) {
  for (const auto& [k, v] : config_items(config)) out << "config " << k << '=' << v << '\n';
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  return f;
}

std::array<double, 3> parse_ratios(const std::string& s) {
  std::array<double, 3> r{};
  std::istringstream in(s);
  std::string part;
  std::size_t i = 0;
  while (std::getline(in, part, ',')) {
    if (i == 3) throw ConfigError("--ratios expects three comma-separated values");
    char* end = nullptr;
    r[i] = std::strtod(part.c_str(), &end);
    if (part.empty() || end != part.c_str() + part.size()) throw ConfigError("--ratios: invalid number '" + part + "'");
    ++i;
  }
  if (i != 3) throw ConfigError("--ratios expects three comma-separated values");
  return r;
}

// Densifier settings recorded by training, used as evaluation defaults.
RunConfig config_from_manifest(const std::string& manifest) {
  RunConfig config;
  const auto j = nlohmann::json::parse(manifest, nullptr, false);
  if (j.is_discarded() || !j.contains("train")) return config;
  for (const char* key : {"densifier", "m", "gs_threshold", "fn_neighbors", "threads"})
    if (j["train"].contains(key)) set_config_value(config, key, j["train"][key].get<std::string>());
  return config;
}

void print_metrics(std::ostream& out, const std::string& label, const RankReport& report) {
  std::ostringstream body;
  write_metrics(body, report);
  std::istringstream lines(body.str());
  std::string line;
  while (std::getline(lines, line)) out << label << '\t' << line << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Commonsense knowledge graph completion with graph densification"};
  app.name("ckg");
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse a triplet file and write normalised triplets and entity table");
  std::string ingest_input, ingest_format = "tsv", ingest_out;
  ingest->add_option("--input", ingest_input, "Input triplets")->required()->check(CLI::ExistingFile);
  ingest->add_option("--format", ingest_format, "tsv or scored")->capture_default_str();
  ingest->add_option("--out", ingest_out, "Output directory")->required();

  // split
  auto* split = app.add_subcommand("split", "Uniform random train/valid/test split");
  std::string split_input, split_format = "tsv", split_out, split_ratios = "0.8,0.1,0.1";
  std::uint64_t split_seed = 0;
  split->add_option("--input", split_input, "Input triplets")->required()->check(CLI::ExistingFile);
  split->add_option("--format", split_format, "tsv or scored")->capture_default_str();
  split->add_option("--ratios", split_ratios, "train,valid,test fractions")->capture_default_str();
  split->add_option("--seed", split_seed, "Shuffle seed")->capture_default_str();
  split->add_option("--out", split_out, "Output directory")->required();

  // inductive-split
  auto* ind = app.add_subcommand("inductive-split", "Keep valid/test triplets touching an entity unseen in train");
  DataFlags ind_data;
  std::string ind_out;
  add_data_flags(ind, ind_data, false);
  ind->add_option("--out", ind_out, "Output directory")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "Degree statistics of a training graph");
  DataFlags stats_data;
  std::string stats_eval;
  std::size_t stats_buckets = 21;
  add_data_flags(stats, stats_data, false);
  stats->add_option("--eval", stats_eval, "Triplets whose degree histogram to report (default: train)")
      ->check(CLI::ExistingFile);
  stats->add_option("--buckets", stats_buckets, "Histogram buckets, the last one open")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train a model and report test metrics");
  DataFlags train_data;
  ConfigFlags train_cfg;
  std::string train_out, train_ckpt;
  bool train_inductive = false;
  add_data_flags(train, train_data, true);
  add_config_flags(train, train_cfg, true);
  train->add_option("--out", train_out, "Output directory (model.ckpt, train.log, metrics.txt)")->required();
  train->add_option("--checkpoint", train_ckpt, "Checkpoint path (default: <out>/model.ckpt)");
  train->add_flag("--inductive", train_inductive, "Report test metrics on inductive triplets only");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Filtered ranking metrics of a checkpoint");
  DataFlags eval_data;
  ConfigFlags eval_cfg;
  std::string eval_ckpt, eval_dump, eval_edges;
  bool eval_inductive = false;
  add_data_flags(eval, eval_data, true);
  add_config_flags(eval, eval_cfg, false);
  eval->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_flag("--inductive", eval_inductive, "Score only triplets touching an entity unseen in train");
  eval->add_option("--rank-dump", eval_dump, "Write per-query ranks to this file");
  eval->add_option("--edges-out", eval_edges, "Write the test-time synthetic edges to this file");

  // inspect-neighbors
  auto* inspect = app.add_subcommand("inspect-neighbors", "Nearest neighbours in the test-time embedding space");
  DataFlags insp_data;
  ConfigFlags insp_cfg;
  std::string insp_ckpt;
  std::vector<std::string> insp_entities;
  std::size_t insp_top = 3;
  add_data_flags(inspect, insp_data, true);
  add_config_flags(inspect, insp_cfg, false);
  inspect->add_option("--checkpoint", insp_ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  inspect->add_option("--entity", insp_entities, "Entity text to inspect (repeatable)")->required();
  inspect->add_option("--top-k", insp_top, "Neighbours per entity")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (ingest->parsed()) {
      const TripletSet set = ingest_triplets(ingest_input, parse_format(ingest_format));
      fs::create_directories(ingest_out);
      write_triplets_tsv(fs::path(ingest_out) / "triplets.tsv", set);
      write_entity_table(fs::path(ingest_out) / "entities.tsv", *set.vocab);
      out << "triplets\t" << set.size() << "\nentities\t" << set.num_entities() << "\nrelations\t"
          << set.num_relations() << '\n';
    } else if (split->parsed()) {
      const TripletSet set = ingest_triplets(split_input, parse_format(split_format));
      const SplitBundle b = uniform_split(set, parse_ratios(split_ratios), split_seed);
      fs::create_directories(split_out);
      write_triplets_tsv(fs::path(split_out) / "train.tsv", b.train);
      write_triplets_tsv(fs::path(split_out) / "valid.tsv", b.valid);
      write_triplets_tsv(fs::path(split_out) / "test.tsv", b.test);
      write_entity_table(fs::path(split_out) / "entities.tsv", *set.vocab);
      out << "train\t" << b.train.size() << "\nvalid\t" << b.valid.size() << "\ntest\t" << b.test.size() << '\n';
    } else if (ind->parsed()) {
      const Loaded l = load_data(ind_data);
      const InductiveSplit s = inductive_filter(l.bundle);
      fs::create_directories(ind_out);
      write_triplets_tsv(fs::path(ind_out) / "valid_inductive.tsv", s.valid);
      write_triplets_tsv(fs::path(ind_out) / "test_inductive.tsv", s.test);
      out << "valid_inductive\t" << s.valid.size() << "\ntest_inductive\t" << s.test.size() << "\nunseen_test_entities\t"
          << unseen_entities(l.bundle.train, l.bundle.test).size() << '\n';
    } else if (stats->parsed()) {
      const Loaded l = load_data(stats_data);
      TripletSet eval_set = l.bundle.train;
      if (!stats_eval.empty())
        eval_set = load_split(stats_eval, parse_format(stats_data.format), l.bundle.train.vocab, false);
      const MultiGraph g = build_graph(l.bundle.train, false);
      const DegreeReport r = degree_stats(g, eval_set, stats_buckets);
      char buf[64];
      out << "entities\t" << l.bundle.train.num_entities() << "\nrelations\t" << l.bundle.train.num_relations()
          << "\ntriplets\t" << l.bundle.train.size() << '\n';
      std::snprintf(buf, sizeof(buf), "%.4f", r.mean_in_degree);
      out << "mean_in_degree\t" << buf << '\n';
      std::snprintf(buf, sizeof(buf), "%.4f", r.mean_triplet_degree);
      out << "mean_triplet_degree\t" << buf << '\n';
      for (std::size_t b = 0; b < r.histogram.size(); ++b)
        out << "degree\t" << b << (b + 1 == r.histogram.size() ? "+" : "") << '\t' << r.histogram[b] << '\n';
    } else if (train->parsed()) {
      RunConfig config = train_cfg.config_file.empty() ? RunConfig{} : load_config(train_cfg.config_file);
      apply_flags(config, train_cfg);
      set_num_threads(config.threads);
      const Loaded l = load_data(train_data);
      fs::create_directories(train_out);
      const fs::path ckpt = train_ckpt.empty() ? fs::path(train_out) / "model.ckpt" : fs::path(train_ckpt);
      std::ofstream log = open_out(fs::path(train_out) / "train.log");
      std::ostringstream echo;
      echo_config(echo, config);
      log << echo.str() << std::flush;
      out << echo.str();

      FitOptions options;
      options.checkpoint_path = ckpt;
      options.on_log = [&](const LogRecord& r) {
        const auto line = format_log_record(r);
        log << line << '\n' << std::flush;
        out << line << '\n';
      };
      const FitResult result = fit(l.bundle, l.features, config, options);
      if (result.log.empty()) save_checkpoint(ckpt, result.best_checkpoint);

      std::ofstream metrics = open_out(fs::path(train_out) / "metrics.txt");
      const std::array<const TripletSet*, 3> sets{&l.bundle.train, &l.bundle.valid, &l.bundle.test};
      const KnownSet known(l.bundle.train.num_relations(), sets);
      const MultiGraph graph = build_graph(l.bundle.train, true);
      const TripletSet& target = l.bundle.test.empty() ? l.bundle.valid : l.bundle.test;
      if (!target.empty()) {
        const auto report =
            evaluate(result.best_model, target, known, graph, l.features, config.densifier, train_inductive);
        const std::string label = l.bundle.test.empty() ? "valid" : "test";
        print_metrics(metrics, label, report);
        print_metrics(out, label, report);
        print_metrics(log, label, report);
      }
      out << "checkpoint\t" << ckpt.string() << '\n';
    } else if (eval->parsed() || inspect->parsed()) {
      const bool is_eval = eval->parsed();
      const Checkpoint ckpt = load_checkpoint(is_eval ? eval_ckpt : insp_ckpt);
      const Model model = model_from_checkpoint(ckpt);
      RunConfig config = config_from_manifest(ckpt.manifest_json);
      apply_flags(config, is_eval ? eval_cfg : insp_cfg);
      set_num_threads(config.threads);
      const Loaded l = load_data(is_eval ? eval_data : insp_data, model.relation_names);
      if (l.features.dim(1) != model.config.encoder.input_dim)
        throw DataError("feature width " + std::to_string(l.features.dim(1)) + " does not match the checkpoint (" +
                        std::to_string(model.config.encoder.input_dim) + ")");
      const MultiGraph graph = build_graph(l.bundle.train, true);
      if (is_eval) {
        if (l.bundle.test.empty()) throw ConfigError("evaluate requires --test");
        const std::array<const TripletSet*, 3> sets{&l.bundle.train, &l.bundle.valid, &l.bundle.test};
        const KnownSet known(model.config.num_base_relations, sets);
        const auto report = evaluate(model, l.bundle.test, known, graph, l.features, config.densifier, eval_inductive);
        write_metrics(out, report);
        if (!eval_dump.empty()) write_rank_dump(eval_dump, report, *l.bundle.vocab());
        if (!eval_edges.empty())
          write_synthetic_edges(eval_edges, test_time_embed(graph, l.features, model, config.densifier).edges);
      } else {
        std::vector<EntityId> ids;
        for (const auto& text : insp_entities) {
          const auto id = l.bundle.vocab()->entities.find(text);
          if (!id) throw DataError("unknown entity '" + text + "'");
          ids.push_back(*id);
        }
        const auto embedded = test_time_embed(graph, l.features, model, config.densifier);
        out << nearest_neighbor_report(embedded.embeddings, *l.bundle.vocab(), ids, insp_top);
      }
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace ckg::cli
