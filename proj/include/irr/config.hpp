// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0
//
// `section.key=value` run configuration. Unknown keys and cross-field
// violations are ConfigErrors naming the key.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "irr/bench.hpp"
#include "irr/data.hpp"
#include "irr/indexer.hpp"
#include "irr/model.hpp"
#include "irr/trainer.hpp"

namespace irr::config {

struct Paths {
  std::string embeddings = "embeddings.bin";
  std::string interactions = "interactions.tsv";
  std::string sid_table = "sid_table.tsv";
  std::string checkpoint = "model.ckpt";
  std::string report_dir = "reports";
};

struct RunConfig {
  index::IndexerConfig indexer;
  model::ModelConfig model;
  train::TrainConfig trainer;
  std::vector<std::size_t> widths{10, 20, 50};  // decoder.W, benchmark beam widths
  std::size_t eval_width = 0;                   // 0: 2 * max(eval.ks)
  bool constrained = true;
  std::vector<std::size_t> ks{5, 10};
  bool five_core = true;
  std::size_t flattened_max_seq = 0;            // 0: N * L
  data::SyntheticConfig synthetic;
  bench::BenchConfig bench;
  Paths paths;

  ran::RanMode item_mode() const { return trainer.item_mode(); }
  std::size_t resolved_eval_width() const;
  model::ModelConfig resolved_model() const;
};

/// Applies one `key=value` assignment. Throws ConfigError naming the key.
void apply(RunConfig& config, const std::string& key, const std::string& value);

/// Parses a file body, then `overrides` (each `key=value`) in order, then validates.
RunConfig parse_config(std::istream& in, const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides = {});

void validate(const RunConfig& config);

/// Every key with its resolved value, sorted by key; parse_config(canonical) round-trips.
std::string canonical_text(const RunConfig& config);
/// FNV-1a 64 of canonical_text, as 16 hex digits.
std::string digest(const RunConfig& config);

std::vector<std::string> known_keys();

}  // namespace irr::config
