// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Glue shared by the command-line tool and the acceptance harness.

#pragma once

#include <functional>

#include "irr/config.hpp"
#include "irr/eval.hpp"

namespace irr::pipeline {

/// Interactions, leave-one-out splits and the catalog over the log's items.
struct Workspace {
  data::InteractionLog log;
  std::vector<data::UserSplit> splits;
  index::SidTable table;
  item::Catalog catalog;
  std::vector<model::Sample> samples;  // from the training prefixes
};

/// Every log item must have a SID (LookupError otherwise).
Workspace prepare(data::InteractionLog log, index::SidTable table, std::size_t history,
                  bool five_core);

eval::EvalOptions eval_options(const config::RunConfig& config);

struct EpochReport {
  std::size_t epoch = 0;  // 1-based
  train::EpochMetrics metrics;
};

struct TrainOutcome {
  std::vector<EpochReport> epochs;
  train::AdamState optimizer;
  std::string rng_state;
};

/// Runs config.trainer.epochs epochs; `on_epoch` returning false stops early.
TrainOutcome train(model::CompactModel& model, const Workspace& ws, const config::RunConfig& config,
           const std::function<bool(const EpochReport&, train::Trainer&)>& on_epoch = {});

}  // namespace irr::pipeline
