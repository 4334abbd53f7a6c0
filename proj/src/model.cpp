// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "irr/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "irr/error.hpp"

namespace irr::model {

ran::RanConfig ModelConfig::ran_config() const {
  return {levels, codebook_size, dim, cumulative_prefix};
}

CompactModel::CompactModel(const ModelConfig& config, std::size_t items, std::uint64_t seed)
    : config_(config) {
  if (items == 0) throw ConfigError("model: empty catalog");
  Rng ran_rng(derive_seed(seed, 1));
  ran = ran::Ran(config.ran_config(), ran_rng, "ran");
  if (!config.shared_ran) user_ran_ = ran.renamed("user_ran");
  Rng uid_rng(derive_seed(seed, 2));
  uid = item::make_uid_table(items, config.dim, uid_rng, "uid");
  Rng bb_rng(derive_seed(seed, 3));
  backbone = Backbone({config.layers, config.dim, config.heads, config.history}, bb_rng);
}

std::vector<ad::Parameter*> CompactModel::parameters() {
  auto out = ran.parameters();
  if (user_ran_) {
    for (auto* p : user_ran_->parameters()) out.push_back(p);
  }
  out.push_back(&uid);
  for (auto* p : backbone.parameters()) out.push_back(p);
  return out;
}

namespace {

std::size_t check_batch(std::span<const std::vector<std::size_t>> seqs, std::size_t limit,
                        const char* what) {
  if (seqs.empty()) throw ContractError(std::string(what) + ": empty batch");
  std::size_t steps = 0;
  for (const auto& s : seqs) {
    if (s.empty()) throw ContractError(std::string(what) + ": empty sequence");
    if (s.size() > limit) {
      throw ContractError(std::string(what) + ": sequence of " + std::to_string(s.size()) +
                          " exceeds " + std::to_string(limit));
    }
    steps = std::max(steps, s.size());
  }
  return steps;
}

}  // namespace

CompactForward encode_compact(ad::Tape& tape, CompactModel& model, const item::Catalog& catalog,
                              std::span<const std::vector<std::size_t>> histories,
                              std::span<const std::size_t> extra_items, ran::RanMode item_mode) {
  CompactForward out;
  out.steps = check_batch(histories, model.config().history, "encode_compact");

  std::vector<std::size_t> unique(extra_items.begin(), extra_items.end());
  for (const auto& h : histories) unique.insert(unique.end(), h.begin(), h.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  out.items = item::synthesize_item_embeddings(tape, model.ran, model.uid, catalog, unique,
                                               item_mode);

  std::vector<std::size_t> rows(histories.size() * out.steps, 0);
  for (std::size_t b = 0; b < histories.size(); ++b) {
    out.lengths.push_back(histories[b].size());
    for (std::size_t t = 0; t < histories[b].size(); ++t) {
      const auto it = std::lower_bound(unique.begin(), unique.end(), histories[b][t]);
      rows[b * out.steps + t] = static_cast<std::size_t>(it - unique.begin());
    }
  }
  ad::Var packed = ad::gather_rows(out.items.embeddings, std::move(rows));
  ad::Var states =
      model.backbone.forward(tape, packed, histories.size(), out.steps, out.lengths);
  out.user_states = Backbone::last_states(states, out.steps, out.lengths);
  return out;
}

FlattenedModel::FlattenedModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  Rng rng(derive_seed(seed, 4));
  backbone = Backbone({config.layers, config.dim, config.heads, config.history * config.levels},
                      rng, "flat");
  const double s = 1.0 / std::sqrt(static_cast<double>(config.dim));
  DenseMatrix table(config.levels * config.codebook_size, config.dim);
  for (double& v : table.values()) v = rng.normal(0.0, s);
  tokens = {"flat.tokens", std::move(table)};
  for (std::size_t l = 1; l <= config.levels; ++l) {
    DenseMatrix h(config.codebook_size, config.dim);
    for (double& v : h.values()) v = rng.normal(0.0, s);
    heads_.emplace_back("flat.head." + std::to_string(l), std::move(h));
  }
}

std::vector<ad::Parameter*> FlattenedModel::parameters() {
  auto out = backbone.parameters();
  out.push_back(&tokens);
  for (auto& h : heads_) out.push_back(&h);
  return out;
}

std::vector<std::size_t> flatten_items(const FlattenedModel& model, const item::Catalog& catalog,
                                       std::span<const std::size_t> items) {
  std::vector<std::size_t> out;
  out.reserve(items.size() * model.config().levels);
  for (auto i : items) {
    const auto& sid = catalog.sid(i);
    for (std::size_t l = 1; l <= sid.size(); ++l) out.push_back(model.token_id(l, sid[l - 1]));
  }
  return out;
}

FlatForward encode_flattened(ad::Tape& tape, FlattenedModel& model,
                             std::span<const std::vector<std::size_t>> streams) {
  FlatForward out;
  out.steps = check_batch(streams, model.backbone.config().max_seq, "encode_flattened");
  std::vector<std::size_t> rows(streams.size() * out.steps, 0);
  for (std::size_t b = 0; b < streams.size(); ++b) {
    out.lengths.push_back(streams[b].size());
    std::copy(streams[b].begin(), streams[b].end(), rows.begin() + b * out.steps);
  }
  ad::Var packed = ad::gather_rows(tape.param(model.tokens), std::move(rows));
  out.outputs = model.backbone.forward(tape, packed, streams.size(), out.steps, out.lengths);
  return out;
}

ad::Var flattened_loss(ad::Tape& tape, FlattenedModel& model, const item::Catalog& catalog,
                       std::span<const Sample> batch) {
  const std::size_t levels = model.config().levels;
  std::vector<std::vector<std::size_t>> streams;
  std::vector<std::vector<std::uint32_t>> next_codes;  // per stream position
  for (const auto& s : batch) {
    streams.push_back(flatten_items(model, catalog, s.history));
    std::vector<std::uint32_t> codes;
    for (auto i : s.history) {
      for (auto c : catalog.sid(i).codes) codes.push_back(c);
    }
    codes.erase(codes.begin());
    codes.push_back(catalog.sid(s.target)[0]);
    next_codes.push_back(std::move(codes));
  }
  FlatForward fwd = encode_flattened(tape, model, streams);

  // group positions by the level of the token they predict
  std::map<std::size_t, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> groups;
  std::size_t positions = 0;
  for (std::size_t b = 0; b < streams.size(); ++b) {
    for (std::size_t t = 0; t < streams[b].size(); ++t) {
      const std::size_t next_level = (t + 1) % levels + 1;
      auto& [rows, targets] = groups[next_level];
      rows.push_back(b * fwd.steps + t);
      targets.push_back(next_codes[b][t]);
      ++positions;
    }
  }
  ad::Var total;
  for (auto& [level, group] : groups) {
    auto& [rows, targets] = group;
    const double weight = static_cast<double>(rows.size()) / static_cast<double>(positions);
    ad::Var h = ad::gather_rows(fwd.outputs, rows);
    ad::Var p = ad::softmax_rows(ad::matmul_nt(h, tape.param(model.head(level))));
    ad::Var term = ad::scale(ad::nll_rows(p, targets), weight);
    total = total.valid() ? ad::add(total, term) : term;
  }
  return total;
}

}  // namespace irr::model
