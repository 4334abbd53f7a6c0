// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "irr/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "irr/error.hpp"

namespace irr::ad {
namespace {

void require_same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) {
    throw ContractError(std::string(op) + ": operands must live on the same tape");
  }
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

Tape::Node make_node(OpKind kind, std::initializer_list<std::size_t> inputs) {
  Tape::Node n;
  n.kind = kind;
  std::size_t i = 0;
  for (auto id : inputs) n.inputs[i++] = id;
  return n;
}

}  // namespace

const char* op_name(OpKind kind) noexcept {
  switch (kind) {
    case OpKind::kConstant: return "constant";
    case OpKind::kParameter: return "parameter";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kMatMulNT: return "matmul_nt";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kAddRow: return "add_row";
    case OpKind::kRelu: return "relu";
    case OpKind::kLayerNorm: return "layernorm";
    case OpKind::kSoftmaxRows: return "softmax_rows";
    case OpKind::kConcatCols: return "concat_cols";
    case OpKind::kGatherRows: return "gather_rows";
    case OpKind::kNllRows: return "nll_rows";
    case OpKind::kSum: return "sum";
    case OpKind::kAttention: return "causal_attention";
  }
  return "?";
}

const DenseMatrix& Var::value() const { return tape_->node(id_).value; }
const DenseMatrix& Var::grad() const { return tape_->node(id_).grad; }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(DenseMatrix value) {
  Node n;
  n.kind = OpKind::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  for (const auto& [ptr, id] : param_nodes_) {
    if (ptr == &p) return Var(this, id);
  }
  Node n;
  n.kind = OpKind::kParameter;
  n.value = p.value;
  n.param = &p;
  Var v = push(std::move(n));
  param_nodes_.emplace_back(&p, v.id());
  return v;
}

DenseMatrix& Tape::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad.reset(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw ContractError("backward: root belongs to another tape");
  const Node& r = nodes_.at(root.id());
  if (r.value.rows() != 1 || r.value.cols() != 1) {
    throw ContractError("backward: root must be scalar, got " + r.value.shape_string());
  }
  for (auto& n : nodes_) n.grad = DenseMatrix();
  grad_of(root.id())(0, 0) = 1.0;
  for (std::size_t id = root.id() + 1; id-- > 0;) {
    if (nodes_[id].grad.empty()) continue;
    backward_node(id);
  }
}

void Tape::backward_node(std::size_t id) {
  // Copy what we need: grad_of() may not reallocate nodes_, but keep references short.
  Node& n = nodes_[id];
  const DenseMatrix& g = n.grad;
  const auto in0 = n.inputs[0];
  const auto in1 = n.inputs[1];
  const auto in2 = n.inputs[2];
  switch (n.kind) {
    case OpKind::kConstant:
      break;
    case OpKind::kParameter: {
      Parameter& p = *n.param;
      if (p.grad.empty() || !p.grad.same_shape(p.value)) p.zero_grad();
      auto dst = p.grad.values();
      auto src = g.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      break;
    }
    case OpKind::kMatMul: {
      const DenseMatrix& a = nodes_[in0].value;
      const DenseMatrix& b = nodes_[in1].value;
      // dA += G B^T ; dB += A^T G
      kernels::gemm_nt(g.data(), b.data(), grad_of(in0).data(), a.rows(), b.cols(), a.cols(),
                       true);
      kernels::gemm_tn(a.data(), g.data(), grad_of(in1).data(), a.cols(), a.rows(), b.cols(),
                       true);
      break;
    }
    case OpKind::kMatMulNT: {
      const DenseMatrix& a = nodes_[in0].value;
      const DenseMatrix& b = nodes_[in1].value;
      // C = A B^T: dA += G B ; dB += G^T A
      kernels::gemm_nn(g.data(), b.data(), grad_of(in0).data(), a.rows(), b.rows(), a.cols(),
                       true);
      kernels::gemm_tn(g.data(), a.data(), grad_of(in1).data(), b.rows(), a.rows(), a.cols(),
                       true);
      break;
    }
    case OpKind::kAdd:
    case OpKind::kSub: {
      const double sign = n.kind == OpKind::kAdd ? 1.0 : -1.0;
      auto da = grad_of(in0).values();
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += g.values()[i];
      auto db = grad_of(in1).values();
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += sign * g.values()[i];
      break;
    }
    case OpKind::kMul: {
      const auto a = nodes_[in0].value.values();
      const auto b = nodes_[in1].value.values();
      auto da = grad_of(in0).values();
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += g.values()[i] * b[i];
      auto db = grad_of(in1).values();
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += g.values()[i] * a[i];
      break;
    }
    case OpKind::kScale: {
      auto da = grad_of(in0).values();
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += n.scalar * g.values()[i];
      break;
    }
    case OpKind::kAddRow: {
      auto& da = grad_of(in0);
      for (std::size_t i = 0; i < da.size(); ++i) da.values()[i] += g.values()[i];
      auto& drow = grad_of(in1);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        auto gr = g.row(r);
        for (std::size_t c = 0; c < g.cols(); ++c) drow(0, c) += gr[c];
      }
      break;
    }
    case OpKind::kRelu: {
      const auto x = nodes_[in0].value.values();
      auto da = grad_of(in0).values();
      for (std::size_t i = 0; i < da.size(); ++i) {
        if (x[i] > 0.0) da[i] += g.values()[i];
      }
      break;
    }
    case OpKind::kLayerNorm: {
      // saved: rows x 2 (mean, rstd)
      const DenseMatrix& x = nodes_[in0].value;
      const DenseMatrix& gain = nodes_[in1].value;
      auto& dx = grad_of(in0);
      auto& dgain = grad_of(in1);
      auto& dbias = grad_of(in2);
      const std::size_t cols = x.cols();
      std::vector<double> xhat(cols), dxhat(cols);
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const double mean = n.saved(r, 0);
        const double rstd = n.saved(r, 1);
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          xhat[c] = (x(r, c) - mean) * rstd;
          dxhat[c] = g(r, c) * gain(0, c);
          dgain(0, c) += g(r, c) * xhat[c];
          dbias(0, c) += g(r, c);
          sum_dxhat += dxhat[c];
          sum_dxhat_xhat += dxhat[c] * xhat[c];
        }
        const double inv_n = 1.0 / static_cast<double>(cols);
        for (std::size_t c = 0; c < cols; ++c) {
          dx(r, c) += rstd * (dxhat[c] - inv_n * sum_dxhat - xhat[c] * inv_n * sum_dxhat_xhat);
        }
      }
      break;
    }
    case OpKind::kSoftmaxRows: {
      const DenseMatrix& y = n.value;
      auto& dx = grad_of(in0);
      for (std::size_t r = 0; r < y.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
        for (std::size_t c = 0; c < y.cols(); ++c) dx(r, c) += y(r, c) * (g(r, c) - dot);
      }
      break;
    }
    case OpKind::kConcatCols: {
      const std::size_t left = nodes_[in0].value.cols();
      const std::size_t right = nodes_[in1].value.cols();
      auto& da = grad_of(in0);
      auto& db = grad_of(in1);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < left; ++c) da(r, c) += g(r, c);
        for (std::size_t c = 0; c < right; ++c) db(r, c) += g(r, left + c);
      }
      break;
    }
    case OpKind::kGatherRows: {
      auto& dt = grad_of(in0);
      for (std::size_t r = 0; r < n.index.size(); ++r) {
        auto dst = dt.row(n.index[r]);
        auto src = g.row(r);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
      }
      break;
    }
    case OpKind::kNllRows: {
      const DenseMatrix& p = nodes_[in0].value;
      auto& dp = grad_of(in0);
      const double inv = g(0, 0) / static_cast<double>(n.index.size());
      for (std::size_t r = 0; r < n.index.size(); ++r) {
        dp(r, n.index[r]) -= inv / p(r, n.index[r]);
      }
      break;
    }
    case OpKind::kSum: {
      auto da = grad_of(in0).values();
      for (auto& v : da) v += g(0, 0);
      break;
    }
    case OpKind::kAttention: {
      const DenseMatrix& q = nodes_[in0].value;
      const DenseMatrix& k = nodes_[in1].value;
      const DenseMatrix& v = nodes_[in2].value;
      kernels::AttentionShape shape = n.attention;
      shape.lengths = n.lengths;
      // grad_of() on three distinct ids; the node vector is not resized here.
      double* dq = grad_of(in0).data();
      double* dk = grad_of(in1).data();
      double* dv = grad_of(in2).data();
      kernels::causal_attention_backward(shape, q.data(), k.data(), v.data(), n.saved.data(),
                                         g.data(), dq, dk, dv);
      break;
    }
  }
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  const DenseMatrix& av = a.value();
  const DenseMatrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: cannot multiply " + av.shape_string() + " by " +
                         bv.shape_string());
  }
  auto n = make_node(OpKind::kMatMul, {a.id(), b.id()});
  n.value.reset(av.rows(), bv.cols());
  kernels::gemm_nn(av.data(), bv.data(), n.value.data(), av.rows(), av.cols(), bv.cols(), false);
  return a.tape()->push(std::move(n));
}

Var matmul_nt(Var a, Var b) {
  require_same_tape(a, b, "matmul_nt");
  const DenseMatrix& av = a.value();
  const DenseMatrix& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw DimensionError("matmul_nt: cannot multiply " + av.shape_string() + " by transpose of " +
                         bv.shape_string());
  }
  auto n = make_node(OpKind::kMatMulNT, {a.id(), b.id()});
  n.value.reset(av.rows(), bv.rows());
  kernels::gemm_nt(av.data(), bv.data(), n.value.data(), av.rows(), av.cols(), bv.rows(), false);
  return a.tape()->push(std::move(n));
}

namespace {

Var binary_elementwise(Var a, Var b, OpKind kind, const char* name) {
  require_same_tape(a, b, name);
  require_same_shape(a.value(), b.value(), name);
  auto n = make_node(kind, {a.id(), b.id()});
  n.value = a.value();
  auto out = n.value.values();
  const auto bv = b.value().values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    switch (kind) {
      case OpKind::kAdd: out[i] += bv[i]; break;
      case OpKind::kSub: out[i] -= bv[i]; break;
      default: out[i] *= bv[i]; break;
    }
  }
  return a.tape()->push(std::move(n));
}

}  // namespace

Var add(Var a, Var b) { return binary_elementwise(a, b, OpKind::kAdd, "add"); }
Var sub(Var a, Var b) { return binary_elementwise(a, b, OpKind::kSub, "sub"); }
Var mul(Var a, Var b) { return binary_elementwise(a, b, OpKind::kMul, "mul"); }

Var scale(Var a, double factor) {
  auto n = make_node(OpKind::kScale, {a.id()});
  n.scalar = factor;
  n.value = a.value();
  for (auto& v : n.value.values()) v *= factor;
  return a.tape()->push(std::move(n));
}

Var add_row(Var a, Var row) {
  require_same_tape(a, row, "add_row");
  const DenseMatrix& av = a.value();
  const DenseMatrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw DimensionError("add_row: row " + rv.shape_string() + " incompatible with " +
                         av.shape_string());
  }
  auto n = make_node(OpKind::kAddRow, {a.id(), row.id()});
  n.value = av;
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto dst = n.value.row(r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += rv(0, c);
  }
  return a.tape()->push(std::move(n));
}

Var relu(Var a) {
  auto n = make_node(OpKind::kRelu, {a.id()});
  n.value = a.value();
  for (auto& v : n.value.values()) v = v > 0.0 ? v : 0.0;
  return a.tape()->push(std::move(n));
}

Var layernorm(Var a, Var gain, Var bias) {
  require_same_tape(a, gain, "layernorm");
  require_same_tape(a, bias, "layernorm");
  const DenseMatrix& x = a.value();
  if (gain.value().rows() != 1 || gain.value().cols() != x.cols() ||
      !gain.value().same_shape(bias.value())) {
    throw DimensionError("layernorm: gain/bias " + gain.value().shape_string() + "/" +
                         bias.value().shape_string() + " incompatible with " + x.shape_string());
  }
  if (x.cols() == 0) throw DimensionError("layernorm: empty rows");
  auto n = make_node(OpKind::kLayerNorm, {a.id(), gain.id(), bias.id()});
  n.value.reset(x.rows(), x.cols());
  n.saved.reset(x.rows(), 2);
  const double inv_n = 1.0 / static_cast<double>(x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mean = 0.0;
    for (double v : x.row(r)) mean += v;
    mean *= inv_n;
    double var = 0.0;
    for (double v : x.row(r)) var += (v - mean) * (v - mean);
    var *= inv_n;
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    n.saved(r, 0) = mean;
    n.saved(r, 1) = rstd;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      n.value(r, c) = (x(r, c) - mean) * rstd * gain.value()(0, c) + bias.value()(0, c);
    }
  }
  return a.tape()->push(std::move(n));
}

Var softmax_rows(Var a) {
  const DenseMatrix& x = a.value();
  if (x.empty()) throw DimensionError("softmax_rows: empty input " + x.shape_string());
  auto n = make_node(OpKind::kSoftmaxRows, {a.id()});
  n.value.reset(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto in = x.row(r);
    auto out = n.value.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      out[c] = std::exp(in[c] - mx);
      total += out[c];
    }
    for (auto& v : out) v /= total;
  }
  return a.tape()->push(std::move(n));
}

Var concat_cols(Var a, Var b) {
  require_same_tape(a, b, "concat_cols");
  const DenseMatrix& av = a.value();
  const DenseMatrix& bv = b.value();
  if (av.rows() != bv.rows()) {
    throw DimensionError("concat_cols: row mismatch " + av.shape_string() + " vs " +
                         bv.shape_string());
  }
  auto n = make_node(OpKind::kConcatCols, {a.id(), b.id()});
  n.value.reset(av.rows(), av.cols() + bv.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto out = n.value.row(r);
    std::copy(av.row(r).begin(), av.row(r).end(), out.begin());
    std::copy(bv.row(r).begin(), bv.row(r).end(), out.begin() + av.cols());
  }
  return a.tape()->push(std::move(n));
}

Var gather_rows(Var table, std::vector<std::size_t> rows) {
  const DenseMatrix& t = table.value();
  auto n = make_node(OpKind::kGatherRows, {table.id()});
  n.value.reset(rows.size(), t.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= t.rows()) {
      throw IndexError("gather_rows: row " + std::to_string(rows[r]) + " out of range for " +
                       t.shape_string());
    }
    std::copy(t.row(rows[r]).begin(), t.row(rows[r]).end(), n.value.row(r).begin());
  }
  n.index = std::move(rows);
  return table.tape()->push(std::move(n));
}

Var nll_rows(Var probs, std::span<const std::size_t> targets) {
  const DenseMatrix& p = probs.value();
  if (targets.size() != p.rows() || p.rows() == 0) {
    throw DimensionError("nll_rows: " + std::to_string(targets.size()) + " targets for " +
                         p.shape_string());
  }
  auto n = make_node(OpKind::kNllRows, {probs.id()});
  n.value.reset(1, 1);
  double total = 0.0;
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] >= p.cols()) {
      throw IndexError("nll: target " + std::to_string(targets[r]) + " out of range for " +
                       std::to_string(p.cols()) + " classes");
    }
    const double pt = p(r, targets[r]);
    if (!(pt > 0.0)) throw NumericError("nll: probability underflow at row " + std::to_string(r));
    total -= std::log(pt);
  }
  n.value(0, 0) = total / static_cast<double>(targets.size());
  n.index.assign(targets.begin(), targets.end());
  return probs.tape()->push(std::move(n));
}

Var nll_of_index(Var prob_row, std::size_t target) {
  if (prob_row.value().rows() != 1) {
    throw DimensionError("nll_of_index: expected a single row, got " +
                         prob_row.value().shape_string());
  }
  const std::size_t t[1] = {target};
  return nll_rows(prob_row, t);
}

Var sum(Var a) {
  auto n = make_node(OpKind::kSum, {a.id()});
  n.value.reset(1, 1);
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  n.value(0, 0) = total;
  return a.tape()->push(std::move(n));
}

Var causal_attention(Var q, Var k, Var v, std::size_t batch, std::size_t steps,
                     std::size_t heads, std::span<const std::size_t> lengths) {
  require_same_tape(q, k, "causal_attention");
  require_same_tape(q, v, "causal_attention");
  const DenseMatrix& qv = q.value();
  require_same_shape(qv, k.value(), "causal_attention");
  require_same_shape(qv, v.value(), "causal_attention");
  if (qv.rows() != batch * steps || heads == 0 || qv.cols() % heads != 0 ||
      lengths.size() != batch) {
    throw DimensionError("causal_attention: layout " + std::to_string(batch) + "x" +
                         std::to_string(steps) + " heads=" + std::to_string(heads) +
                         " incompatible with " + qv.shape_string());
  }
  auto n = make_node(OpKind::kAttention, {q.id(), k.id(), v.id()});
  n.lengths.assign(lengths.begin(), lengths.end());
  for (auto len : n.lengths) {
    if (len == 0 || len > steps) throw ContractError("causal_attention: invalid sequence length");
  }
  n.attention.batch = batch;
  n.attention.steps = steps;
  n.attention.heads = heads;
  n.attention.head_dim = qv.cols() / heads;
  n.attention.lengths = n.lengths;
  n.value.reset(qv.rows(), qv.cols());
  n.saved.reset(1, n.attention.prob_size());
  kernels::causal_attention_forward(n.attention, qv.data(), k.value().data(), v.value().data(),
                                    n.value.data(), n.saved.data());
  return q.tape()->push(std::move(n));
}

double max_relative_error(const DenseMatrix& analytic, const DenseMatrix& numeric) {
  if (!analytic.same_shape(numeric)) {
    throw DimensionError("max_relative_error: shape mismatch " + analytic.shape_string() +
                         " vs " + numeric.shape_string());
  }
  constexpr double kFloor = 1e-2;
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic.values()[i];
    const double b = numeric.values()[i];
    const double denom = std::max({std::abs(a), std::abs(b), kFloor});
    worst = std::max(worst, std::abs(a - b) / denom);
  }
  return worst;
}

}  // namespace irr::ad
