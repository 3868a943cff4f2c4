#pragma once

// Reverse-mode automatic differentiation over dense tensors.
//
// A Tape records every primitive application in creation order, which is a
// topological order of the computation graph. backward() walks it in reverse
// exactly once per node. Tapes are single-use and single-threaded; build a
// fresh one per forward pass.

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ckg/tensor.hpp"

namespace ckg::ad {

class Tape;

// Handle to a node on a tape.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Propagates `grad_out` (gradient wrt this node's output `out`) into the
// parents' gradient sinks.
using BackwardFn = std::function<void(Tape& tape, const Tensor& grad_out, const Tensor& out)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that never receives a gradient.
  Var constant(Tensor value);
  // Leaf that receives a gradient (a trainable parameter or grad-check input).
  Var variable(Tensor value);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  // Gradient of the last backward() target wrt `v`; zeros when `v` did not
  // contribute to it.
  Tensor grad(Var v) const;

  // Runs reverse accumulation from a scalar loss.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Records a primitive application. The node requires a gradient when any
  // parent does; otherwise `fn` is dropped. Throws NumericError naming
  // `primitive` when `value` is not finite.
  Var record(const char* primitive, Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(const char* primitive, Tensor value, std::span<const Var> parents, BackwardFn fn);

  // Gradient accumulator for `v`, zero-initialised on first use; nullptr
  // when `v` does not require a gradient. Only valid during backward().
  Tensor* grad_sink(Var v);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };
  void check_owner(Var v) const;
  // A deque keeps value() references valid while the tape grows.
  std::deque<Node> nodes_;
};

// Primitives. Shapes are checked; mismatches throw ContractError naming the
// primitive. No broadcasting beyond the row-wise forms named below.

Var matmul(Var a, Var b);                 // [m,k] x [k,n] -> [m,n]
Var transpose(Var a);                     // [m,n] -> [n,m]
Var add(Var a, Var b);                    // same shape
Var mul(Var a, Var b);                    // elementwise, same shape
Var scalar_mul(Var a, double c);
Var add_bias(Var x, Var bias);            // [n,d] + [1,d] per row
Var scale_rows(Var x, Var s);             // [n,d] * [n,1] per row
Var concat(std::span<const Var> parts, std::size_t axis);  // rank-2, axis 0 or 1
Var gather_rows(Var table, std::span<const std::uint32_t> ids);  // [n,d] -> [|ids|,d]
Var scatter_add_rows(Var x, std::span<const std::uint32_t> ids, std::size_t rows);  // [m,d] -> [rows,d]
Var sigmoid(Var x);
Var tanh(Var x);
Var relu(Var x);
// out[..., j] = x[..., perm[j]] along the last axis.
Var permute_columns(Var x, std::span<const std::uint32_t> perm);
// x: [2,d] or [B,2,d]; kernels: [K,2,n] -> [K,d] or [B,K,d]. Stride 1,
// cross-correlation, zero padding (n-1)/2 on the left and the remainder on
// the right so the width stays d.
Var conv1d_same(Var x, Var kernels);
Var reshape(Var x, Shape shape);
Var sum(Var x);
Var mean(Var x);
// Mean binary cross-entropy of sigmoid(logits) against `targets` in [0,1],
// evaluated in the log-sum-exp stable form.
Var bce_with_logits(Var logits, const Tensor& targets);

double sigmoid_value(double x);

// Central-difference gradient check. `f` must return a scalar; every input
// becomes a variable leaf. Returns the maximum elementwise relative error
// |a - n| / max(|a|, |n|, 1e-8) over all inputs.
using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;
double grad_check(const ScalarFn& f, const std::vector<Tensor>& inputs, double eps = 1e-5);

}  // namespace ckg::ad
