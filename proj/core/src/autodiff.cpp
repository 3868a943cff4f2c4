#include "ckg/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "ckg/error.hpp"
#include "ckg/parallel.hpp"

namespace ckg::ad {

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return tape_->value(*this);
}

void Tape::check_owner(Var v) const {
  if (&v.tape() != this || v.id() >= nodes_.size()) throw ContractError("Var does not belong to this tape");
}

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("constant: non-finite value");
  nodes_.push_back({std::move(value), {}, false, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  if (!value.all_finite()) throw NumericError("variable: non-finite value");
  nodes_.push_back({std::move(value), {}, true, false, {}});
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(Var v) const {
  check_owner(v);
  return nodes_[v.id()].value;
}

bool Tape::requires_grad(Var v) const {
  check_owner(v);
  return nodes_[v.id()].requires_grad;
}

Tensor Tape::grad(Var v) const {
  check_owner(v);
  const auto& n = nodes_[v.id()];
  if (n.has_grad) return n.grad;
  return Tensor(n.value.shape(), 0.0);
}

Tensor* Tape::grad_sink(Var v) {
  check_owner(v);
  auto& n = nodes_[v.id()];
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return &n.grad;
}

Var Tape::record(const char* primitive, Tensor value, std::span<const Var> parents, BackwardFn fn) {
  if (!value.all_finite()) throw NumericError(std::string(primitive) + ": non-finite output");
  bool needs = false;
  for (const auto& p : parents) {
    check_owner(p);
    needs = needs || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back({std::move(value), {}, needs, false, needs ? std::move(fn) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* primitive, Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  return record(primitive, std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
}

void Tape::backward(Var loss) {
  check_owner(loss);
  if (nodes_[loss.id()].value.size() != 1 || nodes_[loss.id()].value.rank() > 1)
    throw ContractError("backward: loss must be a scalar, got shape " +
                        shape_string(nodes_[loss.id()].value.shape()));
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  if (Tensor* g = grad_sink(loss)) g->fill(1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad, n.value);
  }
}

namespace {

[[noreturn]] void shape_error(const char* primitive, const std::string& detail) {
  throw ContractError(std::string(primitive) + ": " + detail);
}

void require_rank(const char* primitive, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank)
    shape_error(primitive, "expected rank " + std::to_string(rank) + ", got " + shape_string(t.shape()));
}

void require_same(const char* primitive, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    shape_error(primitive, "shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

// out[m,n] (+)= a[m,k] * b[k,n]
void gemm_nn(const double* a, const double* b, double* out, std::size_t m, std::size_t k, std::size_t n) {
  parallel_for(m, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double* orow = out + i * n;
      const double* arow = a + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = arow[p];
        if (av == 0.0) continue;
        const double* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
  }, 4);
}

// out[m,k] += g[m,n] * b[k,n]^T
void gemm_nt(const double* g, const double* b, double* out, std::size_t m, std::size_t n, std::size_t k) {
  parallel_for(m, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double* grow = g + i * n;
      double* orow = out + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const double* brow = b + p * n;
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
        orow[p] += acc;
      }
    }
  }, 4);
}

std::vector<double> transposed(const Tensor& a) {
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> t(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t[j * m + i] = a[i * n + j];
  return t;
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank("matmul", av, 2);
  require_rank("matmul", bv, 2);
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  if (bv.dim(0) != k)
    shape_error("matmul", "inner dimensions differ: " + shape_string(av.shape()) + " x " + shape_string(bv.shape()));
  Tensor out(Shape{m, n}, 0.0);
  gemm_nn(av.data(), bv.data(), out.data(), m, k, n);
  return a.tape().record("matmul", std::move(out), {a, b}, [a, b, m, k, n](Tape& t, const Tensor& g, const Tensor&) {
    if (Tensor* da = t.grad_sink(a)) gemm_nt(g.data(), b.value().data(), da->data(), m, n, k);
    if (Tensor* db = t.grad_sink(b)) {
      const auto at = transposed(a.value());
      gemm_nn(at.data(), g.data(), db->data(), k, m, n);
    }
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  require_rank("transpose", av, 2);
  const std::size_t m = av.dim(0), n = av.dim(1);
  Tensor out(Shape{n, m}, transposed(av));
  return a.tape().record("transpose", std::move(out), {a}, [a, m, n](Tape& t, const Tensor& g, const Tensor&) {
    if (Tensor* da = t.grad_sink(a))
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*da)[i * n + j] += g[j * m + i];
  });
}

Var add(Var a, Var b) {
  require_same("add", a.value(), b.value());
  Tensor out = a.value();
  const auto bv = b.value().values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return a.tape().record("add", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g, const Tensor&) {
    for (Var p : {a, b})
      if (Tensor* d = t.grad_sink(p))
        for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i];
  });
}

Var mul(Var a, Var b) {
  require_same("mul", a.value(), b.value());
  Tensor out = a.value();
  const auto bv = b.value().values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.tape().record("mul", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g, const Tensor&) {
    if (Tensor* da = t.grad_sink(a)) {
      const auto bv = b.value().values();
      for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += g[i] * bv[i];
    }
    if (Tensor* db = t.grad_sink(b)) {
      const auto av = a.value().values();
      for (std::size_t i = 0; i < g.size(); ++i) (*db)[i] += g[i] * av[i];
    }
  });
}

Var scalar_mul(Var a, double c) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= c;
  return a.tape().record("scalar_mul", std::move(out), {a}, [a, c](Tape& t, const Tensor& g, const Tensor&) {
    if (Tensor* d = t.grad_sink(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += c * g[i];
  });
}

Var add_bias(Var x, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  require_rank("add_bias", xv, 2);
  require_rank("add_bias", bv, 2);
  const std::size_t n = xv.dim(0), d = xv.dim(1);
  if (bv.dim(0) != 1 || bv.dim(1) != d)
    shape_error("add_bias", "bias " + shape_string(bv.shape()) + " does not match " + shape_string(xv.shape()));
  Tensor out = xv;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] += bv[j];
  return x.tape().record("add_bias", std::move(out), {x, bias}, [x, bias, n, d](Tape& t, const Tensor& g, const Tensor&) {
    if (Tensor* dx = t.grad_sink(x))
      for (std::size_t i = 0; i < g.size(); ++i) (*dx)[i] += g[i];
    if (Tensor* db = t.grad_sink(bias))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) (*db)[j] += g[i * d + j];
  });
}

Var scale_rows(Var x, Var s) {
  const Tensor& xv = x.value();
  const Tensor& sv = s.value();
  require_rank("scale_rows", xv, 2);
  require_rank("scale_rows", sv, 2);
  const std::size_t n = xv.dim(0), d = xv.dim(1);
  if (sv.dim(0) != n || sv.dim(1) != 1)
    shape_error("scale_rows", "scale " + shape_string(sv.shape()) + " does not match " + shape_string(xv.shape()));
  Tensor out = xv;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] *= sv[i];
  return x.tape().record("scale_rows", std::move(out), {x, s}, [x, s, n, d](Tape& t, const Tensor& g, const Tensor&) {
    if (Tensor* dx = t.grad_sink(x)) {
      const auto& sv = s.value();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) (*dx)[i * d + j] += g[i * d + j] * sv[i];
    }
    if (Tensor* ds = t.grad_sink(s)) {
      const auto& xv = x.value();
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += g[i * d + j] * xv[i * d + j];
        (*ds)[i] += acc;
      }
    }
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) shape_error("concat", "no inputs");
  if (axis > 1) shape_error("concat", "axis must be 0 or 1");
  for (const auto& p : parts) require_rank("concat", p.value(), 2);
  const std::size_t rows0 = parts[0].value().dim(0), cols0 = parts[0].value().dim(1);
  std::size_t total = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    if (axis == 0 && v.dim(1) != cols0) shape_error("concat", "column counts differ");
    if (axis == 1 && v.dim(0) != rows0) shape_error("concat", "row counts differ");
    total += v.dim(axis);
  }
  const std::size_t out_rows = axis == 0 ? total : rows0;
  const std::size_t out_cols = axis == 0 ? cols0 : total;
  Tensor out(Shape{out_rows, out_cols}, 0.0);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    offsets.push_back(offset);
    for (std::size_t i = 0; i < v.dim(0); ++i)
      for (std::size_t j = 0; j < v.dim(1); ++j) {
        if (axis == 0)
          out[(offset + i) * out_cols + j] = v[i * v.dim(1) + j];
        else
          out[i * out_cols + offset + j] = v[i * v.dim(1) + j];
      }
    offset += v.dim(axis);
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape().record(
      "concat", std::move(out), std::span<const Var>(inputs),
      [inputs, offsets, axis, out_cols](Tape& t, const Tensor& g, const Tensor&) {
        for (std::size_t k = 0; k < inputs.size(); ++k) {
          Tensor* d = t.grad_sink(inputs[k]);
          if (!d) continue;
          const std::size_t r = d->dim(0), c = d->dim(1);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
              (*d)[i * c + j] += axis == 0 ? g[(offsets[k] + i) * out_cols + j] : g[i * out_cols + offsets[k] + j];
        }
      });
}

Var gather_rows(Var table, std::span<const std::uint32_t> ids) {
  const Tensor& tv = table.value();
  require_rank("gather_rows", tv, 2);
  const std::size_t n = tv.dim(0), d = tv.dim(1);
  Tensor out(Shape{ids.size(), d}, 0.0);
  for (std::size_t e = 0; e < ids.size(); ++e) {
    if (ids[e] >= n) shape_error("gather_rows", "row id " + std::to_string(ids[e]) + " out of range");
    std::copy_n(tv.data() + ids[e] * d, d, out.data() + e * d);
  }
  std::vector<std::uint32_t> idx(ids.begin(), ids.end());
  return table.tape().record("gather_rows", std::move(out), {table},
                             [table, idx = std::move(idx), d](Tape& t, const Tensor& g, const Tensor&) {
                               if (Tensor* dt = t.grad_sink(table))
                                 for (std::size_t e = 0; e < idx.size(); ++e)
                                   for (std::size_t j = 0; j < d; ++j) (*dt)[idx[e] * d + j] += g[e * d + j];
                             });
}

Var scatter_add_rows(Var x, std::span<const std::uint32_t> ids, std::size_t rows) {
  const Tensor& xv = x.value();
  require_rank("scatter_add_rows", xv, 2);
  const std::size_t m = xv.dim(0), d = xv.dim(1);
  if (ids.size() != m) shape_error("scatter_add_rows", "one target id per input row required");
  Tensor out(Shape{rows, d}, 0.0);
  for (std::size_t e = 0; e < m; ++e) {
    if (ids[e] >= rows) shape_error("scatter_add_rows", "target id " + std::to_string(ids[e]) + " out of range");
    for (std::size_t j = 0; j < d; ++j) out[ids[e] * d + j] += xv[e * d + j];
  }
  std::vector<std::uint32_t> idx(ids.begin(), ids.end());
  return x.tape().record("scatter_add_rows", std::move(out), {x},
                         [x, idx = std::move(idx), d](Tape& t, const Tensor& g, const Tensor&) {
                           if (Tensor* dx = t.grad_sink(x))
                             for (std::size_t e = 0; e < idx.size(); ++e)
                               for (std::size_t j = 0; j < d; ++j) (*dx)[e * d + j] += g[idx[e] * d + j];
                         });
}

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Var sigmoid(Var x) {
  Tensor out = x.value();
  for (auto& v : out.values()) v = sigmoid_value(v);
  return x.tape().record("sigmoid", std::move(out), {x}, [x](Tape& t, const Tensor& g, const Tensor& y) {
    if (Tensor* d = t.grad_sink(x))
      for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(Var x) {
  Tensor out = x.value();
  for (auto& v : out.values()) v = std::tanh(v);
  return x.tape().record("tanh", std::move(out), {x}, [x](Tape& t, const Tensor& g, const Tensor& y) {
    if (Tensor* d = t.grad_sink(x))
      for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var relu(Var x) {
  Tensor out = x.value();
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  return x.tape().record("relu", std::move(out), {x}, [x](Tape& t, const Tensor& g, const Tensor&) {
    if (Tensor* d = t.grad_sink(x)) {
      const auto& xv = x.value();
      for (std::size_t i = 0; i < g.size(); ++i)
        if (xv[i] > 0.0) (*d)[i] += g[i];
    }
  });
}

Var permute_columns(Var x, std::span<const std::uint32_t> perm) {
  const Tensor& xv = x.value();
  if (xv.rank() == 0) shape_error("permute_columns", "scalar input");
  const std::size_t d = xv.shape().back();
  if (perm.size() != d) shape_error("permute_columns", "permutation length differs from last axis");
  std::vector<bool> hit(d, false);
  for (auto p : perm) {
    if (p >= d || hit[p]) shape_error("permute_columns", "not a valid permutation");
    hit[p] = true;
  }
  const std::size_t rows = d == 0 ? 0 : xv.size() / d;
  Tensor out(xv.shape(), 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = xv[i * d + perm[j]];
  std::vector<std::uint32_t> p(perm.begin(), perm.end());
  return x.tape().record("permute_columns", std::move(out), {x},
                         [x, p = std::move(p), rows, d](Tape& t, const Tensor& g, const Tensor&) {
                           if (Tensor* dx = t.grad_sink(x))
                             for (std::size_t i = 0; i < rows; ++i)
                               for (std::size_t j = 0; j < d; ++j) (*dx)[i * d + p[j]] += g[i * d + j];
                         });
}

Var conv1d_same(Var x, Var kernels) {
  const Tensor& xv = x.value();
  const Tensor& kv = kernels.value();
  require_rank("conv1d_same", kv, 3);
  const bool batched = xv.rank() == 3;
  if (!batched && xv.rank() != 2) shape_error("conv1d_same", "input must be [2,d] or [B,2,d]");
  const std::size_t batch = batched ? xv.dim(0) : 1;
  const std::size_t channels = xv.dim(batched ? 1 : 0);
  const std::size_t d = xv.dim(batched ? 2 : 1);
  const std::size_t nk = kv.dim(0), width = kv.dim(2);
  if (kv.dim(1) != channels)
    shape_error("conv1d_same", "kernel channels " + std::to_string(kv.dim(1)) + " vs input " + std::to_string(channels));
  if (width == 0 || width > d) shape_error("conv1d_same", "kernel width must be in [1, d]");
  const auto left = static_cast<std::ptrdiff_t>((width - 1) / 2);

  Shape out_shape = batched ? Shape{batch, nk, d} : Shape{nk, d};
  Tensor out(out_shape, 0.0);
  const double* X = xv.data();
  const double* W = kv.data();
  parallel_for(batch, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) {
      const double* xb = X + b * channels * d;
      double* ob = out.data() + b * nk * d;
      for (std::size_t k = 0; k < nk; ++k) {
        double* orow = ob + k * d;
        for (std::size_t c = 0; c < channels; ++c) {
          const double* xrow = xb + c * d;
          const double* w = W + (k * channels + c) * width;
          for (std::size_t tap = 0; tap < width; ++tap) {
            const double wv = w[tap];
            const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(tap) - left;
            const std::size_t j0 = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
            const std::size_t j1 = shift > 0 ? d - static_cast<std::size_t>(shift) : d;
            for (std::size_t j = j0; j < j1; ++j) orow[j] += wv * xrow[static_cast<std::ptrdiff_t>(j) + shift];
          }
        }
      }
    }
  }, 1);

  return x.tape().record(
      "conv1d_same", std::move(out), {x, kernels},
      [x, kernels, batch, channels, d, nk, width, left](Tape& t, const Tensor& g, const Tensor&) {
        const double* X = x.value().data();
        const double* W = kernels.value().data();
        if (Tensor* dx = t.grad_sink(x)) {
          double* DX = dx->data();
          parallel_for(batch, [&](std::size_t b0, std::size_t b1) {
            for (std::size_t b = b0; b < b1; ++b)
              for (std::size_t k = 0; k < nk; ++k) {
                const double* grow = g.data() + (b * nk + k) * d;
                for (std::size_t c = 0; c < channels; ++c) {
                  double* dxrow = DX + (b * channels + c) * d;
                  const double* w = W + (k * channels + c) * width;
                  for (std::size_t tap = 0; tap < width; ++tap) {
                    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(tap) - left;
                    const std::size_t j0 = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                    const std::size_t j1 = shift > 0 ? d - static_cast<std::size_t>(shift) : d;
                    for (std::size_t j = j0; j < j1; ++j)
                      dxrow[static_cast<std::ptrdiff_t>(j) + shift] += grow[j] * w[tap];
                  }
                }
              }
          }, 1);
        }
        if (Tensor* dw = t.grad_sink(kernels)) {
          double* DW = dw->data();
          parallel_for(nk, [&](std::size_t k0, std::size_t k1) {
            for (std::size_t k = k0; k < k1; ++k)
              for (std::size_t c = 0; c < channels; ++c)
                for (std::size_t tap = 0; tap < width; ++tap) {
                  const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(tap) - left;
                  const std::size_t j0 = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                  const std::size_t j1 = shift > 0 ? d - static_cast<std::size_t>(shift) : d;
                  double acc = 0.0;
                  for (std::size_t b = 0; b < batch; ++b) {
                    const double* grow = g.data() + (b * nk + k) * d;
                    const double* xrow = X + (b * channels + c) * d;
                    for (std::size_t j = j0; j < j1; ++j) acc += grow[j] * xrow[static_cast<std::ptrdiff_t>(j) + shift];
                  }
                  DW[(k * channels + c) * width + tap] += acc;
                }
          }, 1);
        }
      });
}

Var reshape(Var x, Shape shape) {
  if (shape_size(shape) != x.value().size())
    shape_error("reshape", "cannot reshape " + shape_string(x.value().shape()) + " to " + shape_string(shape));
  Tensor out(shape, std::vector<double>(x.value().values().begin(), x.value().values().end()));
  return x.tape().record("reshape", std::move(out), {x}, [x](Tape& t, const Tensor& g, const Tensor&) {
    if (Tensor* d = t.grad_sink(x))
      for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i];
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return x.tape().record("sum", Tensor::scalar(s), {x}, [x](Tape& t, const Tensor& g, const Tensor&) {
    if (Tensor* d = t.grad_sink(x))
      for (auto& v : d->values()) v += g[0];
  });
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  if (n == 0) shape_error("mean", "empty input");
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return x.tape().record("mean", Tensor::scalar(s / static_cast<double>(n)), {x},
                         [x, n](Tape& t, const Tensor& g, const Tensor&) {
                           if (Tensor* d = t.grad_sink(x))
                             for (auto& v : d->values()) v += g[0] / static_cast<double>(n);
                         });
}

Var bce_with_logits(Var logits, const Tensor& targets) {
  const Tensor& s = logits.value();
  if (s.size() != targets.size())
    shape_error("bce_with_logits", "logits " + shape_string(s.shape()) + " vs targets " + shape_string(targets.shape()));
  const std::size_t n = s.size();
  if (n == 0) shape_error("bce_with_logits", "empty input");
  for (double tv : targets.values())
    if (!(tv >= 0.0 && tv <= 1.0)) shape_error("bce_with_logits", "targets must lie in [0,1]");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = s[i];
    total += std::max(x, 0.0) - x * targets[i] + std::log1p(std::exp(-std::abs(x)));
  }
  return logits.tape().record("bce_with_logits", Tensor::scalar(total / static_cast<double>(n)), {logits},
                              [logits, targets, n](Tape& t, const Tensor& g, const Tensor&) {
                                if (Tensor* d = t.grad_sink(logits)) {
                                  const auto& s = logits.value();
                                  const double scale = g[0] / static_cast<double>(n);
                                  for (std::size_t i = 0; i < n; ++i)
                                    (*d)[i] += scale * (sigmoid_value(s[i]) - targets[i]);
                                }
                              });
}

double grad_check(const ScalarFn& f, const std::vector<Tensor>& inputs, double eps) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& in : inputs) vars.push_back(tape.variable(in));
    Var out = f(tape, vars);
    tape.backward(out);
    for (const auto& v : vars) analytic.push_back(tape.grad(v));
  }
  auto evaluate = [&](const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& x : xs) vars.push_back(tape.variable(x));
    return f(tape, vars).value().item();
  };
  double worst = 0.0;
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double orig = inputs[k][i];
      probe[k][i] = orig + eps;
      const double up = evaluate(probe);
      probe[k][i] = orig - eps;
      const double down = evaluate(probe);
      probe[k][i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace ckg::ad
