// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Recursive-Assignment Network: L codebooks V_l (K x d) and fusion nets for
// levels 2..L. Every call is batched: row r of the guidance matrix is one
// independent invocation.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "irr/autodiff.hpp"
#include "irr/indexer.hpp"
#include "irr/rng.hpp"

namespace irr::ran {

enum class RanMode : std::uint8_t { kRedistribution, kTeacherForcing };

const char* mode_name(RanMode mode) noexcept;

struct RanConfig {
  std::size_t levels = 4;
  std::size_t codebook_size = 128;
  std::size_t dim = 32;
  /// true: z_prefix = z_1 + ... + z_{l-1}; false: z_prefix = z_{l-1}.
  bool cumulative_prefix = true;
};

/// affine(2d -> d) -> relu -> affine(d -> d)
struct FusionNet {
  ad::Parameter w1, b1, w2, b2;
};

/// Per-level nodes of one batched run. p[l] rows sum to 1.
struct RanTrace {
  RanMode mode = RanMode::kRedistribution;
  std::vector<ad::Var> h, p, z;
  /// Conditioning paths of a teacher-forced run (one per row).
  std::vector<index::SidCode> sids;
};

class Ran {
 public:
  Ran() = default;
  /// Codebooks and fusion weights ~ N(0, 1/sqrt(fan)), biases zero.
  Ran(const RanConfig& config, Rng& rng, const std::string& prefix = "ran");
  /// All parameters zero.
  static Ran zeros(const RanConfig& config, const std::string& prefix = "ran");

  const RanConfig& config() const noexcept { return config_; }
  std::size_t levels() const noexcept { return config_.levels; }

  /// level is 1-based throughout.
  ad::Parameter& codebook(std::size_t level) { return codebooks_.at(level - 1); }
  const ad::Parameter& codebook(std::size_t level) const { return codebooks_.at(level - 1); }
  FusionNet& fusion(std::size_t level) { return fusion_.at(level - 2); }

  std::vector<ad::Parameter*> parameters();
  /// Copy with every parameter renamed to `prefix`.
  Ran renamed(const std::string& prefix) const;

  /// h_1 = x; h_l = FusionNet_l([x || z_prefix]) for l >= 2.
  ad::Var fuse_hidden(ad::Tape& tape, ad::Var x, ad::Var z_prefix, std::size_t level);
  /// softmax(h V_l^T)
  ad::Var assign_distribution(ad::Tape& tape, ad::Var h, std::size_t level);
  /// Redistribution: p V_l. TeacherForcing: rows V_l[targets[r]].
  ad::Var aggregate_context(ad::Tape& tape, ad::Var p, std::span<const std::size_t> targets,
                            std::size_t level, RanMode mode);
  /// Prefix that feeds level `level + 1` given the running prefix and z_level.
  ad::Var next_prefix(ad::Var prefix, ad::Var z) const;

  /// fuse -> assign -> aggregate for levels 1..L. TeacherForcing needs one SID per row.
  RanTrace run_recursive(ad::Tape& tape, ad::Var x, RanMode mode,
                         std::span<const index::SidCode> sids = {});

 private:
  void check_level(std::size_t level) const;

  RanConfig config_;
  std::vector<ad::Parameter> codebooks_;
  std::vector<FusionNet> fusion_;
};

/// Sum over levels of log p_l[c_l] for row `row` of a teacher-forced trace
/// conditioned on `sid`.
double path_log_prob(const RanTrace& trace, const index::SidCode& sid, std::size_t row = 0);

/// Mean over rows of sum_l -log p_l[sids[r][l]].
ad::Var path_nll(const RanTrace& trace, std::span<const index::SidCode> sids);

/// Sum of the trace contexts, z_1 + ... + z_L.
ad::Var sum_contexts(const RanTrace& trace);

/// Codes of level `level` (1-based) for every row.
std::vector<std::size_t> level_targets(std::span<const index::SidCode> sids, std::size_t level);

}  // namespace irr::ran
