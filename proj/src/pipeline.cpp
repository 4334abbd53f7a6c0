// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "irr/pipeline.hpp"

#include "irr/error.hpp"

namespace irr::pipeline {

Workspace prepare(data::InteractionLog log, index::SidTable table, std::size_t history,
                  bool five_core) {
  Workspace ws;
  ws.log = five_core ? data::five_core_filter(log) : std::move(log);
  ws.splits = data::leave_one_out_split(ws.log);
  if (ws.splits.empty()) throw EmptyDatasetError("no user has the 3 interactions a split needs");
  ws.table = std::move(table);
  ws.catalog = item::Catalog(ws.log.item_ids, ws.table);
  ws.samples = data::training_samples(ws.splits, history);
  if (ws.samples.empty()) throw EmptyDatasetError("training prefixes yield no samples");
  return ws;
}

eval::EvalOptions eval_options(const config::RunConfig& config) {
  eval::EvalOptions opts;
  opts.ks = config.ks;
  opts.decode.width = config.resolved_eval_width();
  opts.decode.constrained = config.constrained;
  opts.decode.item_mode = config.item_mode();
  return opts;
}

TrainOutcome train(model::CompactModel& model, const Workspace& ws, const config::RunConfig& config,
           const std::function<bool(const EpochReport&, train::Trainer&)>& on_epoch) {
  train::Trainer trainer(model, ws.catalog, ws.samples, config.trainer);
  TrainOutcome out;
  for (std::size_t e = 1; e <= config.trainer.epochs; ++e) {
    out.epochs.push_back({e, trainer.run_epoch()});
    if (on_epoch && !on_epoch(out.epochs.back(), trainer)) break;
  }
  out.optimizer = trainer.adam().state();
  out.rng_state = trainer.rng().state();
  return out;
}

}  // namespace irr::pipeline
