// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "irr/bench.hpp"

#include <algorithm>
#include <chrono>
#include <set>

#include "irr/error.hpp"
#include "irr/trainer.hpp"

namespace irr::bench {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

struct Workload {
  index::SidTable table;
  item::Catalog catalog;
  std::vector<model::Sample> samples;
};

// Random catalog with distinct random SIDs and full-length random histories.
Workload make_workload(const BenchConfig& config, std::size_t history, std::size_t count) {
  const auto& m = config.model;
  Rng rng(derive_seed(config.seed, 100));
  Workload w{index::SidTable(m.levels, m.codebook_size, "random", config.seed), {}, {}};
  std::vector<std::string> ids;
  std::set<index::SidCode> used;
  while (ids.size() < config.items) {
    index::SidCode code;
    for (std::size_t l = 0; l < m.levels; ++l) {
      code.codes.push_back(static_cast<std::uint32_t>(rng.below(m.codebook_size)));
    }
    if (!used.insert(code).second) continue;
    ids.push_back("b" + std::to_string(ids.size()));
    w.table.insert(ids.back(), code);
  }
  w.catalog = item::Catalog(ids, w.table);
  for (std::size_t s = 0; s < count; ++s) {
    model::Sample sample;
    for (std::size_t t = 0; t < history; ++t) sample.history.push_back(rng.below(config.items));
    sample.target = rng.below(config.items);
    w.samples.push_back(std::move(sample));
  }
  return w;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

const char* paradigm_name(Paradigm p) noexcept {
  return p == Paradigm::kCompact ? "compact" : "flattened";
}

const char* setting_name(Setting s) noexcept { return s == Setting::kSac ? "SAC" : "SSL"; }

TrainingBench bench_training(const BenchConfig& config, Paradigm paradigm) {
  const auto& m = config.model;
  const std::size_t n = m.history;
  const std::size_t batches = config.warmup + config.timed;
  Workload w = make_workload(config, n, batches * config.batch);
  train::TrainConfig tc;
  tc.seed = config.seed;

  TrainingBench out;
  out.paradigm = paradigm;
  out.batches = config.timed;
  const std::size_t expected = paradigm == Paradigm::kCompact ? n : n * m.levels;
  out.positions = expected;
  out.attention_bytes = model::attention_memory_bytes(expected, m.heads, m.layers);

  model::CompactModel compact;
  model::FlattenedModel flat;
  train::Adam adam;
  model::Backbone* backbone = nullptr;
  if (paradigm == Paradigm::kCompact) {
    compact = model::CompactModel(m, config.items, config.seed);
    adam = train::Adam(compact.parameters());
    backbone = &compact.backbone;
  } else {
    flat = model::FlattenedModel(m, config.seed);
    adam = train::Adam(flat.parameters());
    backbone = &flat.backbone;
  }

  double timed_ms = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    std::span<const model::Sample> batch(w.samples.data() + b * config.batch, config.batch);
    const auto before = backbone->invocations();
    const auto start = Clock::now();
    if (paradigm == Paradigm::kCompact) {
      train::train_step(compact, adam, w.catalog, batch, tc);
    } else {
      train::flattened_train_step(flat, adam, w.catalog, batch, tc);
    }
    const double ms = elapsed_ms(start);
    if (backbone->last_positions() != expected) {
      throw RuntimeFailure(std::string("bench: ") + paradigm_name(paradigm) + " batch used " +
                           std::to_string(backbone->last_positions()) + " positions, expected " +
                           std::to_string(expected));
    }
    out.invocations_per_step = backbone->invocations() - before;
    if (b >= config.warmup) timed_ms += ms;
  }
  out.ms_per_batch = timed_ms / static_cast<double>(config.timed);
  out.samples_per_sec = 1000.0 * static_cast<double>(config.batch) / out.ms_per_batch;
  return out;
}

InferenceBench bench_inference(const BenchConfig& config, Setting setting) {
  const auto& m = config.model;
  InferenceBench out;
  out.setting = setting;
  out.baseline_history = setting == Setting::kSac ? m.history : std::max<std::size_t>(1, m.history / m.levels);

  Workload w = make_workload(config, m.history, config.infer_batch);
  model::CompactModel compact(m, config.items, config.seed);
  model::ModelConfig flat_cfg = m;
  flat_cfg.history = out.baseline_history;
  model::FlattenedModel flat(flat_cfg, config.seed);

  std::vector<std::vector<std::size_t>> compact_hist, baseline_hist;
  for (const auto& s : w.samples) {
    compact_hist.push_back(s.history);
    baseline_hist.emplace_back(s.history.end() - static_cast<std::ptrdiff_t>(out.baseline_history),
                               s.history.end());
  }

  for (std::size_t width : config.widths) {
    LatencyPoint p;
    p.width = width;
    decode::DecodeOptions opts;
    opts.width = width;
    opts.constrained = config.constrained;
    std::vector<double> compact_times, baseline_times;
    for (std::size_t rep = 0; rep <= config.infer_repeats; ++rep) {
      compact.backbone.reset_invocations();
      auto start = Clock::now();
      decode::decode_compact(compact, w.catalog, compact_hist, opts);
      const double c_ms = elapsed_ms(start);
      p.compact_invocations = compact.backbone.invocations();
      p.compact_positions = compact.backbone.last_positions();
      if (p.compact_invocations != 1 || p.compact_positions != m.history) {
        throw RuntimeFailure("bench: compact decode made " + std::to_string(p.compact_invocations) +
                             " backbone passes over " + std::to_string(p.compact_positions) +
                             " positions");
      }

      flat.backbone.reset_invocations();
      start = Clock::now();
      decode::baseline_decode(flat, w.catalog, baseline_hist, width, config.constrained);
      const double b_ms = elapsed_ms(start);
      p.baseline_invocations = flat.backbone.invocations();
      p.baseline_positions = flat.backbone.peak_positions();
      if (p.baseline_invocations != m.levels ||
          p.baseline_positions != out.baseline_history * m.levels) {
        throw RuntimeFailure("bench: baseline decode made " +
                             std::to_string(p.baseline_invocations) + " backbone passes over " +
                             std::to_string(p.baseline_positions) + " positions");
      }
      if (rep > 0) {  // first round warms caches
        compact_times.push_back(c_ms);
        baseline_times.push_back(b_ms);
      }
    }
    p.compact_ms = median(compact_times);
    p.baseline_ms = median(baseline_times);
    out.points.push_back(p);
  }
  return out;
}

eval::Report training_report(const TrainingBench& compact, const TrainingBench& flattened,
                             const std::string& digest) {
  eval::Report r;
  for (const auto* t : {&compact, &flattened}) {
    const std::string mode = paradigm_name(t->paradigm);
    r.add({"samples_per_sec", 0, t->samples_per_sec, "SAC", mode, 0, ""});
    r.add({"ms_per_batch", 0, t->ms_per_batch, "SAC", mode, 0, ""});
    r.add({"positions", 0, static_cast<double>(t->positions), "SAC", mode, 0, ""});
    r.add({"backbone_invocations_per_step", 0, static_cast<double>(t->invocations_per_step), "SAC",
           mode, 0, ""});
    r.add({"attention_memory_bytes", 0, t->attention_bytes, "SAC", mode, 0, ""});
  }
  r.add({"attention_memory_ratio", 0, flattened.attention_bytes / compact.attention_bytes, "SAC",
         "", 0, ""});
  r.add({"throughput_ratio", 0, compact.samples_per_sec / flattened.samples_per_sec, "SAC", "", 0,
         ""});
  r.add({"config_digest", 0, 0.0, "", "", 0, digest});
  return r;
}

eval::Report inference_report(const InferenceBench& bench, const std::string& digest) {
  eval::Report r;
  const std::string setting = setting_name(bench.setting);
  r.add({"baseline_history", 0, static_cast<double>(bench.baseline_history), setting, "flattened",
         0, ""});
  for (const auto& p : bench.points) {
    r.add({"latency_ms", 0, p.compact_ms, setting, "compact", p.width, ""});
    r.add({"latency_ms", 0, p.baseline_ms, setting, "flattened", p.width, ""});
    r.add({"backbone_invocations_per_user", 0, static_cast<double>(p.compact_invocations), setting,
           "compact", p.width, ""});
    r.add({"backbone_invocations_per_user", 0, static_cast<double>(p.baseline_invocations),
           setting, "flattened", p.width, ""});
    r.add({"positions", 0, static_cast<double>(p.compact_positions), setting, "compact", p.width,
           ""});
    r.add({"positions", 0, static_cast<double>(p.baseline_positions), setting, "flattened",
           p.width, ""});
    r.add({"speedup", 0, p.baseline_ms / p.compact_ms, setting, "", p.width, ""});
  }
  r.add({"config_digest", 0, 0.0, "", "", 0, digest});
  return r;
}

}  // namespace irr::bench
