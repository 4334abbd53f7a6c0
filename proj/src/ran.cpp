// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "irr/ran.hpp"

#include <cmath>

#include "irr/error.hpp"

namespace irr::ran {
namespace {

DenseMatrix normal_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  DenseMatrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal(0.0, stddev);
  return m;
}

std::string level_name(const std::string& prefix, const char* what, std::size_t level) {
  return prefix + "." + what + "." + std::to_string(level);
}

}  // namespace

const char* mode_name(RanMode mode) noexcept {
  return mode == RanMode::kRedistribution ? "redistribution" : "teacher_forcing";
}

Ran::Ran(const RanConfig& config, Rng& rng, const std::string& prefix) : config_(config) {
  if (config.levels == 0 || config.codebook_size == 0 || config.dim == 0) {
    throw ConfigError("ran: levels, K and d must be positive");
  }
  const double d = static_cast<double>(config.dim);
  for (std::size_t l = 1; l <= config.levels; ++l) {
    codebooks_.emplace_back(level_name(prefix, "codebook", l),
                            normal_matrix(config.codebook_size, config.dim, 1.0 / std::sqrt(d), rng));
  }
  for (std::size_t l = 2; l <= config.levels; ++l) {
    const std::string base = level_name(prefix, "fusion", l);
    FusionNet f;
    f.w1 = {base + ".w1", normal_matrix(2 * config.dim, config.dim, 1.0 / std::sqrt(2.0 * d), rng)};
    f.b1 = {base + ".b1", DenseMatrix(1, config.dim)};
    f.w2 = {base + ".w2", normal_matrix(config.dim, config.dim, 1.0 / std::sqrt(d), rng)};
    f.b2 = {base + ".b2", DenseMatrix(1, config.dim)};
    fusion_.push_back(std::move(f));
  }
}

Ran Ran::zeros(const RanConfig& config, const std::string& prefix) {
  Rng rng(0);
  Ran out(config, rng, prefix);
  for (auto* p : out.parameters()) p->value.fill(0.0);
  return out;
}

std::vector<ad::Parameter*> Ran::parameters() {
  std::vector<ad::Parameter*> out;
  for (auto& c : codebooks_) out.push_back(&c);
  for (auto& f : fusion_) {
    for (auto* p : {&f.w1, &f.b1, &f.w2, &f.b2}) out.push_back(p);
  }
  return out;
}

Ran Ran::renamed(const std::string& prefix) const {
  Ran copy = *this;
  for (std::size_t l = 1; l <= config_.levels; ++l) {
    copy.codebooks_[l - 1].name = level_name(prefix, "codebook", l);
  }
  for (std::size_t l = 2; l <= config_.levels; ++l) {
    const std::string base = level_name(prefix, "fusion", l);
    auto& f = copy.fusion_[l - 2];
    f.w1.name = base + ".w1";
    f.b1.name = base + ".b1";
    f.w2.name = base + ".w2";
    f.b2.name = base + ".b2";
  }
  return copy;
}

void Ran::check_level(std::size_t level) const {
  if (level == 0 || level > config_.levels) {
    throw ContractError("ran: level " + std::to_string(level) + " outside 1.." +
                        std::to_string(config_.levels));
  }
}

ad::Var Ran::fuse_hidden(ad::Tape& tape, ad::Var x, ad::Var z_prefix, std::size_t level) {
  check_level(level);
  if (level == 1) return x;
  if (!z_prefix.valid()) {
    throw ContractError("ran: level " + std::to_string(level) + " needs a context prefix");
  }
  auto& f = fusion(level);
  ad::Var hidden = ad::relu(
      ad::add_row(ad::matmul(ad::concat_cols(x, z_prefix), tape.param(f.w1)), tape.param(f.b1)));
  return ad::add_row(ad::matmul(hidden, tape.param(f.w2)), tape.param(f.b2));
}

ad::Var Ran::assign_distribution(ad::Tape& tape, ad::Var h, std::size_t level) {
  check_level(level);
  return ad::softmax_rows(ad::matmul_nt(h, tape.param(codebook(level))));
}

ad::Var Ran::aggregate_context(ad::Tape& tape, ad::Var p, std::span<const std::size_t> targets,
                               std::size_t level, RanMode mode) {
  check_level(level);
  ad::Var v = tape.param(codebook(level));
  if (mode == RanMode::kRedistribution) return ad::matmul(p, v);
  if (targets.size() != p.rows()) {
    throw ContractError("ran: teacher forcing needs one target per row (" +
                        std::to_string(targets.size()) + " for " + std::to_string(p.rows()) + ")");
  }
  for (auto t : targets) {
    if (t >= config_.codebook_size) {
      throw ContractError("ran: target " + std::to_string(t) + " outside K=" +
                          std::to_string(config_.codebook_size));
    }
  }
  return ad::gather_rows(v, {targets.begin(), targets.end()});
}

ad::Var Ran::next_prefix(ad::Var prefix, ad::Var z) const {
  if (!config_.cumulative_prefix || !prefix.valid()) return z;
  return ad::add(prefix, z);
}

RanTrace Ran::run_recursive(ad::Tape& tape, ad::Var x, RanMode mode,
                            std::span<const index::SidCode> sids) {
  if (x.cols() != config_.dim) {
    throw DimensionError("ran: guidance width " + std::to_string(x.cols()) + " for d=" +
                         std::to_string(config_.dim));
  }
  RanTrace trace;
  trace.mode = mode;
  if (mode == RanMode::kTeacherForcing) {
    if (sids.size() != x.rows()) throw ContractError("ran: teacher forcing needs one SID per row");
    for (const auto& s : sids) {
      if (s.size() != config_.levels) throw ContractError("ran: SID length differs from L");
    }
    trace.sids.assign(sids.begin(), sids.end());
  }
  ad::Var prefix;
  for (std::size_t l = 1; l <= config_.levels; ++l) {
    ad::Var h = fuse_hidden(tape, x, prefix, l);
    ad::Var p = assign_distribution(tape, h, l);
    std::vector<std::size_t> targets;
    if (mode == RanMode::kTeacherForcing) targets = level_targets(sids, l);
    ad::Var z = aggregate_context(tape, p, targets, l, mode);
    prefix = next_prefix(prefix, z);
    trace.h.push_back(h);
    trace.p.push_back(p);
    trace.z.push_back(z);
  }
  return trace;
}

std::vector<std::size_t> level_targets(std::span<const index::SidCode> sids, std::size_t level) {
  std::vector<std::size_t> out(sids.size());
  for (std::size_t r = 0; r < sids.size(); ++r) out[r] = sids[r][level - 1];
  return out;
}

double path_log_prob(const RanTrace& trace, const index::SidCode& sid, std::size_t row) {
  if (trace.mode != RanMode::kTeacherForcing) {
    throw ContractError("path_log_prob: trace is not teacher-forced");
  }
  if (row >= trace.sids.size() || trace.sids[row] != sid) {
    throw ContractError("path_log_prob: trace was conditioned on a different SID");
  }
  double total = 0.0;
  for (std::size_t l = 0; l < trace.p.size(); ++l) total += std::log(trace.p[l].value()(row, sid[l]));
  return total;
}

ad::Var path_nll(const RanTrace& trace, std::span<const index::SidCode> sids) {
  if (trace.p.empty()) throw ContractError("path_nll: empty trace");
  ad::Var total;
  for (std::size_t l = 0; l < trace.p.size(); ++l) {
    const auto targets = level_targets(sids, l + 1);
    ad::Var term = ad::nll_rows(trace.p[l], targets);
    total = total.valid() ? ad::add(total, term) : term;
  }
  return total;
}

ad::Var sum_contexts(const RanTrace& trace) {
  ad::Var total = trace.z.at(0);
  for (std::size_t l = 1; l < trace.z.size(); ++l) total = ad::add(total, trace.z[l]);
  return total;
}

}  // namespace irr::ran
