#include "ckg/store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "ckg/error.hpp"

namespace ckg {

std::uint32_t SymbolTable::intern(std::string_view text) {
  if (auto it = index_.find(std::string(text)); it != index_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(texts_.size());
  texts_.emplace_back(text);
  index_.emplace(texts_.back(), id);
  return id;
}

std::optional<std::uint32_t> SymbolTable::find(std::string_view text) const {
  if (auto it = index_.find(std::string(text)); it != index_.end()) return it->second;
  return std::nullopt;
}

const std::string& SymbolTable::text(std::uint32_t id) const {
  if (id >= texts_.size()) throw ContractError("symbol id " + std::to_string(id) + " out of range");
  return texts_[id];
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      cols.push_back(line.substr(start));
      break;
    }
    cols.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cols;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TripletSet ingest_triplets_from_string(std::string_view content, TsvFormat format,
                                       std::shared_ptr<Vocabulary> vocab,
                                       std::string_view source_name) {
  if (!vocab) vocab = std::make_shared<Vocabulary>();
  TripletSet out;
  out.vocab = vocab;
  std::unordered_set<Triplet, TripletHash> seen;
  const std::size_t expected = format == TsvFormat::ThreeColumn ? 3 : 4;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    const auto cols = split_tabs(line);
    auto fail = [&](const std::string& why) {
      throw ParseError(std::string(source_name) + ":" + std::to_string(line_no) + ": " + why);
    };
    if (cols.size() != expected)
      fail("expected " + std::to_string(expected) + " tab-separated columns, found " +
           std::to_string(cols.size()));
    for (std::size_t c = 0; c < 3; ++c)
      if (cols[c].empty()) fail("empty field in column " + std::to_string(c + 1));

    std::string_view head, rel, tail;
    double weight = 0.0;
    if (format == TsvFormat::ThreeColumn) {
      head = cols[0];
      rel = cols[1];
      tail = cols[2];
    } else {
      rel = cols[0];
      head = cols[1];
      tail = cols[2];
      const std::string w(cols[3]);
      char* parse_end = nullptr;
      weight = std::strtod(w.c_str(), &parse_end);
      if (w.empty() || parse_end != w.c_str() + w.size() || !std::isfinite(weight))
        fail("invalid weight '" + w + "'");
    }
    Triplet t{vocab->entities.intern(head), vocab->relations.intern(rel), vocab->entities.intern(tail)};
    if (!seen.insert(t).second) continue;
    out.triplets.push_back(t);
    if (format == TsvFormat::ScoredFourColumn) out.weights.push_back(weight);
  }
  if (out.triplets.empty()) throw DataError(std::string(source_name) + ": empty dataset");
  return out;
}

TripletSet ingest_triplets(const std::filesystem::path& path, TsvFormat format,
                           std::shared_ptr<Vocabulary> vocab) {
  const std::string content = read_file(path);
  return ingest_triplets_from_string(content, format, std::move(vocab), path.string());
}

SplitBundle uniform_split(const TripletSet& data, std::array<double, 3> ratios, std::uint64_t seed) {
  for (double r : ratios)
    if (!(r > 0.0)) throw ContractError("uniform_split: ratios must be positive");
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
    throw ContractError("uniform_split: ratios must sum to 1");
  const std::size_t n = data.triplets.size();
  if (n < 3) throw DataError("uniform_split: dataset too small (" + std::to_string(n) + " triplets)");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
  const auto n_valid =
      std::min(n - n_train, static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n))));

  SplitBundle bundle;
  for (TripletSet* part : {&bundle.train, &bundle.valid, &bundle.test}) part->vocab = data.vocab;
  const bool weighted = !data.weights.empty();
  for (std::size_t i = 0; i < n; ++i) {
    TripletSet& part = i < n_train ? bundle.train : (i < n_train + n_valid ? bundle.valid : bundle.test);
    part.triplets.push_back(data.triplets[order[i]]);
    if (weighted) part.weights.push_back(data.weights[order[i]]);
  }
  return bundle;
}

namespace {

std::vector<bool> mentioned(const TripletSet& set, std::size_t num_entities) {
  std::vector<bool> seen(num_entities, false);
  for (const auto& t : set.triplets) {
    seen[t.head] = true;
    seen[t.tail] = true;
  }
  return seen;
}

TripletSet keep_unseen(const TripletSet& eval, const std::vector<bool>& seen) {
  TripletSet out;
  out.vocab = eval.vocab;
  for (std::size_t i = 0; i < eval.triplets.size(); ++i) {
    const auto& t = eval.triplets[i];
    if (!seen[t.head] || !seen[t.tail]) {
      out.triplets.push_back(t);
      if (!eval.weights.empty()) out.weights.push_back(eval.weights[i]);
    }
  }
  return out;
}

}  // namespace

InductiveSplit inductive_filter(const SplitBundle& bundle) {
  if (bundle.train.empty() || bundle.valid.empty() || bundle.test.empty())
    throw ContractError("inductive_filter: train/valid/test must be non-empty");
  const auto seen = mentioned(bundle.train, bundle.train.num_entities());
  return {keep_unseen(bundle.valid, seen), keep_unseen(bundle.test, seen)};
}

std::vector<EntityId> unseen_entities(const TripletSet& train, const TripletSet& eval) {
  const std::size_t n = std::max(train.num_entities(), eval.num_entities());
  const auto in_train = mentioned(train, n);
  const auto in_eval = mentioned(eval, n);
  std::vector<EntityId> out;
  for (std::size_t i = 0; i < n; ++i)
    if (in_eval[i] && !in_train[i]) out.push_back(static_cast<EntityId>(i));
  return out;
}

MultiGraph::MultiGraph(std::size_t num_nodes, std::size_t num_base_relations)
    : num_base_relations_(num_base_relations), in_edges_(num_nodes), degree_(num_nodes, 0) {}

void MultiGraph::add_base_edge(EntityId source, RelationId relation, EntityId target) {
  if (source >= num_nodes() || target >= num_nodes() || relation >= similarity_relation())
    throw ContractError("add_base_edge: id out of range");
  in_edges_[target].push_back({source, relation});
  ++degree_[target];
  ++num_base_edges_;
}

MultiGraph MultiGraph::base_only() const {
  if (num_synthetic_edges_ == 0) return *this;
  MultiGraph g = *this;
  const RelationId sim = similarity_relation();
  for (auto& edges : g.in_edges_)
    std::erase_if(edges, [sim](const InEdge& e) { return e.relation == sim; });
  g.num_synthetic_edges_ = 0;
  return g;
}

MultiGraph MultiGraph::with_synthetic(const SyntheticEdgeSet& edges) const {
  MultiGraph g = base_only();
  const RelationId sim = similarity_relation();
  for (const auto& e : edges.edges) {
    if (e.source >= num_nodes() || e.target >= num_nodes())
      throw ContractError("with_synthetic: node id out of range");
    g.in_edges_[e.target].push_back({e.source, sim});
  }
  g.num_synthetic_edges_ = edges.edges.size();
  return g;
}

MultiGraph build_graph(const TripletSet& train, bool add_inverse) {
  if (train.empty()) throw ContractError("build_graph: empty training set");
  MultiGraph g(train.num_entities(), train.num_relations());
  g.has_inverse_ = add_inverse;
  g.original_ = train.triplets;
  for (const auto& t : train.triplets) g.add_base_edge(t.head, t.relation, t.tail);
  if (add_inverse)
    for (const auto& t : train.triplets) g.add_base_edge(t.tail, g.inverse_of(t.relation), t.head);
  return g;
}

DegreeReport degree_stats(const MultiGraph& graph, const TripletSet& triplets,
                          std::size_t histogram_buckets) {
  const std::size_t n = graph.num_nodes();
  std::vector<std::size_t> incident(n, 0);
  for (const auto& t : graph.original_triplets()) {
    ++incident[t.head];
    ++incident[t.tail];
  }
  DegreeReport report;
  report.mean_in_degree =
      n == 0 ? 0.0 : static_cast<double>(graph.original_triplets().size()) / static_cast<double>(n);
  report.histogram.assign(std::max<std::size_t>(1, histogram_buckets), 0);
  double total = 0.0;
  for (const auto& t : triplets.triplets) {
    if (t.head >= n || t.tail >= n) throw ContractError("degree_stats: entity id out of range");
    const double d = 0.5 * static_cast<double>(incident[t.head] + incident[t.tail]);
    report.triplet_degree.push_back(d);
    total += d;
    const auto bucket = std::min(report.histogram.size() - 1, static_cast<std::size_t>(d));
    ++report.histogram[bucket];
  }
  report.mean_triplet_degree = triplets.empty() ? 0.0 : total / static_cast<double>(triplets.size());
  return report;
}

void write_triplets_tsv(const std::filesystem::path& path, const TripletSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& t : set.triplets)
    out << set.vocab->entities.text(t.head) << '\t' << set.vocab->relations.text(t.relation) << '\t'
        << set.vocab->entities.text(t.tail) << '\n';
}

void write_entity_table(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const auto& texts = vocab.entities.texts();
  for (std::size_t i = 0; i < texts.size(); ++i) out << i << '\t' << texts[i] << '\n';
}

std::shared_ptr<Vocabulary> read_entity_table(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  auto vocab = std::make_shared<Vocabulary>();
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string::npos) end = content.size();
    std::string_view line(content.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto tab = line.find('\t');
    auto fail = [&](const std::string& why) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + why);
    };
    if (tab == std::string_view::npos) fail("expected id<TAB>text");
    std::uint64_t id = 0;
    const auto id_text = line.substr(0, tab);
    auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
    if (ec != std::errc() || ptr != id_text.data() + id_text.size()) fail("invalid id");
    if (id != vocab->entities.size()) fail("ids must be contiguous from 0");
    const auto text = line.substr(tab + 1);
    if (text.empty()) fail("empty entity text");
    if (vocab->entities.find(text)) fail("duplicate entity text");
    vocab->entities.intern(text);
  }
  if (vocab->entities.size() == 0) throw DataError(path.string() + ": empty entity table");
  return vocab;
}

}  // namespace ckg
