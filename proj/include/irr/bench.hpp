// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Efficiency harness: training throughput and decode latency of the compact
// and flattened paradigms on an identical random workload, with exact
// invocation and position-count contracts checked on every measured batch.

#pragma once

#include <string>
#include <vector>

#include "irr/eval.hpp"
#include "irr/model.hpp"

namespace irr::bench {

enum class Paradigm { kCompact, kFlattened };
const char* paradigm_name(Paradigm p) noexcept;

enum class Setting { kSac, kSsl };
const char* setting_name(Setting s) noexcept;

struct BenchConfig {
  model::ModelConfig model{4, 128, 32, 2, 2, 30, true, true};
  std::size_t items = 2000;
  std::size_t batch = 64;
  std::size_t warmup = 2;
  std::size_t timed = 30;
  std::vector<std::size_t> widths{10, 20, 50};
  std::size_t infer_batch = 4;
  std::size_t infer_repeats = 3;
  /// Latency runs search the full code space so both paradigms do equal work.
  bool constrained = false;
  std::uint64_t seed = 3;
};

struct TrainingBench {
  Paradigm paradigm = Paradigm::kCompact;
  double samples_per_sec = 0.0;
  double ms_per_batch = 0.0;
  std::size_t positions = 0;
  std::size_t invocations_per_step = 0;
  double attention_bytes = 0.0;
  std::size_t batches = 0;
};

/// Throws RuntimeFailure if a timed batch breaks the position contract.
TrainingBench bench_training(const BenchConfig& config, Paradigm paradigm);

struct LatencyPoint {
  std::size_t width = 0;
  double compact_ms = 0.0;   // per batch, median of repeats
  double baseline_ms = 0.0;
  std::size_t compact_invocations = 0;   // per user per decode
  std::size_t baseline_invocations = 0;
  std::size_t compact_positions = 0;
  std::size_t baseline_positions = 0;    // first pass
};

struct InferenceBench {
  Setting setting = Setting::kSac;
  std::size_t baseline_history = 0;
  std::vector<LatencyPoint> points;
};

/// SSL gives the baseline N/L history items. Throws RuntimeFailure on an
/// invocation-count violation.
InferenceBench bench_inference(const BenchConfig& config, Setting setting);

eval::Report training_report(const TrainingBench& compact, const TrainingBench& flattened,
                             const std::string& digest);
eval::Report inference_report(const InferenceBench& bench, const std::string& digest);

}  // namespace irr::bench
