#include "ckg/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "ckg/error.hpp"

namespace ckg {

namespace {

constexpr char kMagic[4] = {'C', 'K', 'G', 'M'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void doubles(const Tensor& t) {
    out_.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw ParseError(source_ + ": truncated checkpoint");
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) throw ParseError(source_ + ": truncated checkpoint string");
    return s;
  }
  void doubles(Tensor& t) {
    in_.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in_) throw ParseError(source_ + ": truncated checkpoint tensor");
  }

 private:
  std::istream& in_;
  std::string source_;
};

}  // namespace

const Parameter& Checkpoint::param(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p;
  throw DataError("checkpoint has no parameter '" + name + "'");
}

const std::vector<std::uint32_t>& Checkpoint::int_array(const std::string& name) const {
  for (const auto& [n, values] : int_arrays)
    if (n == name) return values;
  throw DataError("checkpoint has no integer array '" + name + "'");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    Writer w(out);
    out.write(kMagic, 4);
    w.pod(kVersion);
    w.pod(static_cast<std::uint64_t>(ckpt.params.size()));
    for (const auto& p : ckpt.params) {
      w.str(p.name);
      w.pod(static_cast<std::uint32_t>(p.value.rank()));
      for (auto d : p.value.shape()) w.pod(static_cast<std::uint64_t>(d));
      w.doubles(p.value);
    }
    w.pod(static_cast<std::uint64_t>(ckpt.int_arrays.size()));
    for (const auto& [name, values] : ckpt.int_arrays) {
      w.str(name);
      w.pod(static_cast<std::uint64_t>(values.size()));
      for (auto v : values) w.pod(v);
    }
    w.pod(static_cast<std::uint8_t>(ckpt.optimizer ? 1 : 0));
    if (ckpt.optimizer) {
      const auto& s = *ckpt.optimizer;
      if (s.first_moment.size() != ckpt.params.size() || s.second_moment.size() != ckpt.params.size())
        throw ContractError("save_checkpoint: optimizer state not aligned with parameters");
      w.pod(s.hyper.lr);
      w.pod(s.hyper.beta1);
      w.pod(s.hyper.beta2);
      w.pod(s.hyper.eps);
      w.pod(s.step);
      for (const auto& m : s.first_moment) w.doubles(m);
      for (const auto& v : s.second_moment) w.doubles(v);
    }
    w.pod(static_cast<std::uint64_t>(ckpt.manifest_json.size()));
    out.write(ckpt.manifest_json.data(), static_cast<std::streamsize>(ckpt.manifest_json.size()));
    if (!out) throw DataError("failed writing checkpoint " + path.string());
  }
  std::ofstream manifest(path.string() + ".json", std::ios::binary);
  if (!manifest) throw DataError("cannot write checkpoint manifest for " + path.string());
  manifest << ckpt.manifest_json << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw ParseError(path.string() + ": bad CKGM magic");
  Reader r(in, path.string());
  if (const auto version = r.pod<std::uint32_t>(); version != kVersion)
    throw ParseError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  const auto n_params = r.pod<std::uint64_t>();
  for (std::uint64_t k = 0; k < n_params; ++k) {
    Parameter p;
    p.name = r.str();
    const auto rank = r.pod<std::uint32_t>();
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(static_cast<std::size_t>(r.pod<std::uint64_t>()));
    p.value = Tensor(shape, 0.0);
    r.doubles(p.value);
    ckpt.params.push_back(std::move(p));
  }
  const auto n_arrays = r.pod<std::uint64_t>();
  for (std::uint64_t k = 0; k < n_arrays; ++k) {
    auto name = r.str();
    const auto len = r.pod<std::uint64_t>();
    std::vector<std::uint32_t> values(len);
    for (auto& v : values) v = r.pod<std::uint32_t>();
    ckpt.int_arrays.emplace_back(std::move(name), std::move(values));
  }
  if (r.pod<std::uint8_t>() != 0) {
    OptimizerState s;
    s.hyper.lr = r.pod<double>();
    s.hyper.beta1 = r.pod<double>();
    s.hyper.beta2 = r.pod<double>();
    s.hyper.eps = r.pod<double>();
    s.step = r.pod<std::uint64_t>();
    for (const auto& p : ckpt.params) {
      s.first_moment.emplace_back(p.value.shape(), 0.0);
      r.doubles(s.first_moment.back());
    }
    for (const auto& p : ckpt.params) {
      s.second_moment.emplace_back(p.value.shape(), 0.0);
      r.doubles(s.second_moment.back());
    }
    ckpt.optimizer = std::move(s);
  }
  const auto manifest_len = r.pod<std::uint64_t>();
  ckpt.manifest_json.resize(manifest_len);
  in.read(ckpt.manifest_json.data(), static_cast<std::streamsize>(manifest_len));
  if (!in) throw ParseError(path.string() + ": truncated manifest");
  return ckpt;
}

}  // namespace ckg
