// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Pre-norm causal transformer over packed, padded batches. Row b*steps + t of
// the input is position t of sequence b; rows at t >= lengths[b] are padding
// and never influence real positions. Position embeddings are indexed by
// recency (newest real row = 0).

#pragma once

#include <span>
#include <string>
#include <vector>

#include "irr/autodiff.hpp"
#include "irr/rng.hpp"

namespace irr::model {

struct BackboneConfig {
  std::size_t layers = 2;
  std::size_t dim = 32;
  std::size_t heads = 2;
  std::size_t max_seq = 30;

  void validate() const;
};

struct BackboneLayer {
  ad::Parameter ln1_gain, ln1_bias, wq, wk, wv, wo;
  ad::Parameter ln2_gain, ln2_bias, ff_w1, ff_b1, ff_w2, ff_b2;
};

class Backbone {
 public:
  Backbone() = default;
  Backbone(const BackboneConfig& config, Rng& rng, const std::string& prefix = "backbone");

  const BackboneConfig& config() const noexcept { return config_; }
  std::vector<ad::Parameter*> parameters();

  /// One invocation: (batch*steps) x d inputs to (batch*steps) x d outputs.
  /// Throws ContractError if steps > max_seq or a length is 0 or > steps.
  ad::Var forward(ad::Tape& tape, ad::Var inputs, std::size_t batch, std::size_t steps,
                  std::span<const std::size_t> lengths);

  /// Rows b*steps + lengths[b] - 1 of a forward output.
  static ad::Var last_states(ad::Var outputs, std::size_t steps,
                             std::span<const std::size_t> lengths);

  std::size_t invocations() const noexcept { return invocations_; }
  void reset_invocations() noexcept { invocations_ = peak_positions_ = 0; }
  /// Position count (steps) of the most recent invocation.
  std::size_t last_positions() const noexcept { return last_positions_; }
  /// Largest position count since the last reset.
  std::size_t peak_positions() const noexcept { return peak_positions_; }

 private:
  BackboneConfig config_;
  ad::Parameter positions_;
  std::vector<BackboneLayer> layers_;
  ad::Parameter final_gain_, final_bias_;
  std::size_t invocations_ = 0;
  std::size_t last_positions_ = 0;
  std::size_t peak_positions_ = 0;
};

/// positions^2 * heads * layers * value_bytes
double attention_memory_bytes(std::size_t positions, std::size_t heads, std::size_t layers,
                              std::size_t value_bytes = sizeof(double));

}  // namespace irr::model
