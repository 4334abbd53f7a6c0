// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "irr/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "irr/error.hpp"

namespace irr::model {
namespace {

ad::Parameter normal_param(std::string name, std::size_t rows, std::size_t cols, double stddev,
                           Rng& rng) {
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal(0.0, stddev);
  return {std::move(name), std::move(m)};
}

ad::Parameter constant_param(std::string name, std::size_t cols, double value) {
  return {std::move(name), DenseMatrix(1, cols, value)};
}

}  // namespace

void BackboneConfig::validate() const {
  if (layers == 0 || dim == 0 || heads == 0) {
    throw ConfigError("backbone: layers, d and heads must be positive");
  }
  if (dim % heads != 0) {
    throw ConfigError("backbone: d=" + std::to_string(dim) + " not divisible by heads=" +
                      std::to_string(heads));
  }
  if (max_seq == 0) throw ConfigError("backbone: max_seq must be at least 1");
}

Backbone::Backbone(const BackboneConfig& config, Rng& rng, const std::string& prefix)
    : config_(config) {
  config.validate();
  const std::size_t d = config.dim;
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  positions_ = normal_param(prefix + ".positions", config.max_seq, d, 0.02, rng);
  for (std::size_t i = 0; i < config.layers; ++i) {
    const std::string b = prefix + ".layer" + std::to_string(i) + ".";
    BackboneLayer l;
    l.ln1_gain = constant_param(b + "ln1.gain", d, 1.0);
    l.ln1_bias = constant_param(b + "ln1.bias", d, 0.0);
    l.wq = normal_param(b + "wq", d, d, s, rng);
    l.wk = normal_param(b + "wk", d, d, s, rng);
    l.wv = normal_param(b + "wv", d, d, s, rng);
    l.wo = normal_param(b + "wo", d, d, s, rng);
    l.ln2_gain = constant_param(b + "ln2.gain", d, 1.0);
    l.ln2_bias = constant_param(b + "ln2.bias", d, 0.0);
    l.ff_w1 = normal_param(b + "ff.w1", d, 4 * d, s, rng);
    l.ff_b1 = constant_param(b + "ff.b1", 4 * d, 0.0);
    l.ff_w2 = normal_param(b + "ff.w2", 4 * d, d, 0.5 * s, rng);
    l.ff_b2 = constant_param(b + "ff.b2", d, 0.0);
    layers_.push_back(std::move(l));
  }
  final_gain_ = constant_param(prefix + ".final.gain", d, 1.0);
  final_bias_ = constant_param(prefix + ".final.bias", d, 0.0);
}

std::vector<ad::Parameter*> Backbone::parameters() {
  std::vector<ad::Parameter*> out{&positions_};
  for (auto& l : layers_) {
    for (auto* p : {&l.ln1_gain, &l.ln1_bias, &l.wq, &l.wk, &l.wv, &l.wo, &l.ln2_gain, &l.ln2_bias,
                    &l.ff_w1, &l.ff_b1, &l.ff_w2, &l.ff_b2}) {
      out.push_back(p);
    }
  }
  out.push_back(&final_gain_);
  out.push_back(&final_bias_);
  return out;
}

ad::Var Backbone::forward(ad::Tape& tape, ad::Var inputs, std::size_t batch, std::size_t steps,
                          std::span<const std::size_t> lengths) {
  if (steps > config_.max_seq) {
    throw ContractError("backbone: " + std::to_string(steps) + " positions exceed max_seq=" +
                        std::to_string(config_.max_seq));
  }
  if (lengths.size() != batch) throw ContractError("backbone: one length per sequence required");
  for (auto len : lengths) {
    if (len == 0 || len > steps) {
      throw ContractError("backbone: sequence length " + std::to_string(len) + " outside 1.." +
                          std::to_string(steps));
    }
  }
  if (inputs.rows() != batch * steps || inputs.cols() != config_.dim) {
    throw DimensionError("backbone: inputs " + inputs.value().shape_string() + " for batch " +
                         std::to_string(batch) + " x " + std::to_string(steps) + " x d=" +
                         std::to_string(config_.dim));
  }
  ++invocations_;
  last_positions_ = steps;
  peak_positions_ = std::max(peak_positions_, steps);

  // Learned positions count back from the newest element, so the last real
  // row always reads embedding 0 whatever the history length.
  std::vector<std::size_t> pos(batch * steps);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < steps; ++t) {
      pos[b * steps + t] = t < lengths[b] ? lengths[b] - 1 - t : t;
    }
  }
  ad::Var x = ad::add(inputs, ad::gather_rows(tape.param(positions_), std::move(pos)));
  for (auto& l : layers_) {
    ad::Var a = ad::layernorm(x, tape.param(l.ln1_gain), tape.param(l.ln1_bias));
    ad::Var att = ad::causal_attention(ad::matmul(a, tape.param(l.wq)),
                                       ad::matmul(a, tape.param(l.wk)),
                                       ad::matmul(a, tape.param(l.wv)), batch, steps,
                                       config_.heads, lengths);
    x = ad::add(x, ad::matmul(att, tape.param(l.wo)));
    ad::Var f = ad::layernorm(x, tape.param(l.ln2_gain), tape.param(l.ln2_bias));
    ad::Var hidden = ad::relu(ad::add_row(ad::matmul(f, tape.param(l.ff_w1)), tape.param(l.ff_b1)));
    x = ad::add(x, ad::add_row(ad::matmul(hidden, tape.param(l.ff_w2)), tape.param(l.ff_b2)));
  }
  return ad::layernorm(x, tape.param(final_gain_), tape.param(final_bias_));
}

ad::Var Backbone::last_states(ad::Var outputs, std::size_t steps,
                              std::span<const std::size_t> lengths) {
  std::vector<std::size_t> rows(lengths.size());
  for (std::size_t b = 0; b < lengths.size(); ++b) rows[b] = b * steps + lengths[b] - 1;
  return ad::gather_rows(outputs, std::move(rows));
}

double attention_memory_bytes(std::size_t positions, std::size_t heads, std::size_t layers,
                              std::size_t value_bytes) {
  const double p = static_cast<double>(positions);
  return p * p * static_cast<double>(heads * layers * value_bytes);
}

}  // namespace irr::model
