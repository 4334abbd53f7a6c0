// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Define-by-run reverse-mode differentiation over DenseMatrix values.
//
// A Tape records primitive applications in creation order, which is already a
// topological order. backward() sweeps it once in reverse and adds each
// parameter leaf's gradient into Parameter::grad.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "irr/kernels.hpp"
#include "irr/tensor.hpp"

namespace irr::ad {

/// A trainable tensor. `grad` always has the shape of `value`.
struct Parameter {
  Parameter() = default;
  Parameter(std::string n, DenseMatrix v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  std::string name;
  DenseMatrix value;
  DenseMatrix grad;

  void zero_grad() { grad.reset(value.rows(), value.cols()); }
};

enum class OpKind : std::uint8_t {
  kConstant,
  kParameter,
  kMatMul,
  kMatMulNT,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddRow,
  kRelu,
  kLayerNorm,
  kSoftmaxRows,
  kConcatCols,
  kGatherRows,
  kNllRows,
  kSum,
  kAttention,
};

const char* op_name(OpKind kind) noexcept;

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const DenseMatrix& value() const;
  /// Gradient after backward(); empty if the node was not reached.
  const DenseMatrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  struct Node {
    OpKind kind = OpKind::kConstant;
    std::array<std::size_t, 3> inputs{kNone, kNone, kNone};
    DenseMatrix value;
    DenseMatrix grad;
    Parameter* param = nullptr;
    double scalar = 0.0;
    std::vector<std::size_t> index;
    DenseMatrix saved;
    kernels::AttentionShape attention;
    std::vector<std::size_t> lengths;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(DenseMatrix value);
  /// Leaf bound to `p`. Repeated calls for the same parameter return the same node.
  Var param(Parameter& p);

  /// Seeds d(root)/d(root) = 1 and accumulates into every reachable parameter.
  void backward(Var root);

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }

  // Used by the op constructors.
  Var push(Node node);
  Node& mutable_node(std::size_t id) { return nodes_[id]; }

 private:
  void backward_node(std::size_t id);
  DenseMatrix& grad_of(std::size_t id);

  std::vector<Node> nodes_;
  std::vector<std::pair<const Parameter*, std::size_t>> param_nodes_;
};

Var matmul(Var a, Var b);
/// a * b^T, the score form h V^T.
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// Adds a 1 x cols row to every row of `a`.
Var add_row(Var a, Var row);
Var relu(Var a);
/// Per-row normalization to zero mean / unit variance, then gain * x + bias.
Var layernorm(Var a, Var gain, Var bias);
inline constexpr double kLayerNormEpsilon = 1e-5;
Var softmax_rows(Var a);
Var concat_cols(Var a, Var b);
Var gather_rows(Var table, std::vector<std::size_t> rows);
/// Mean over rows of -log(probs[r, targets[r]]). `probs` should be a softmax output.
Var nll_rows(Var probs, std::span<const std::size_t> targets);
/// Scalar -log(prob_row[target]) for a single-row distribution.
Var nll_of_index(Var prob_row, std::size_t target);
/// Sum of all entries as a 1 x 1 node.
Var sum(Var a);
/// Multi-head causal self-attention over packed (batch*steps) x width inputs.
Var causal_attention(Var q, Var k, Var v, std::size_t batch, std::size_t steps,
                     std::size_t heads, std::span<const std::size_t> lengths);

/// Central finite-difference gradient of `f` with respect to `p` (test helper).
template <class F>
DenseMatrix numeric_gradient(Parameter& p, F&& f, double eps = 1e-6) {
  DenseMatrix out(p.value.rows(), p.value.cols());
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double orig = p.value.values()[i];
    p.value.values()[i] = orig + eps;
    const double up = f();
    p.value.values()[i] = orig - eps;
    const double down = f();
    p.value.values()[i] = orig;
    out.values()[i] = (up - down) / (2.0 * eps);
  }
  return out;
}

/// max |a-b| / max(1e-2, |a|, |b|) over entries; the gradient-check metric.
double max_relative_error(const DenseMatrix& analytic, const DenseMatrix& numeric);

}  // namespace irr::ad
