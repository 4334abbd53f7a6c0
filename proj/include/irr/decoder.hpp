// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Inference. The compact paradigm runs the backbone once and then searches
// SIDs level by level inside the RAN; the flattened baseline re-runs the
// backbone once per level.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "irr/model.hpp"

namespace irr::decode {

struct ScoredSid {
  index::SidCode sid;
  double log_prob = 0.0;
};

/// Descending log-prob, then ascending code path.
bool beam_order(const ScoredSid& a, const ScoredSid& b);

struct RankedItem {
  std::string item;
  double score = 0.0;
};
using RankedList = std::vector<RankedItem>;

/// Level-wise beam search for every row of `user_states`. Each candidate
/// conditions on hard codewords of its own path. With `trie`, expansions are
/// limited to catalog prefixes.
std::vector<std::vector<ScoredSid>> beam_search(ran::Ran& ran, const DenseMatrix& user_states,
                                                std::size_t width,
                                                const index::PrefixTrie* trie = nullptr);

/// All K^L paths of one guidance row, scored by teacher-forced traces and
/// sorted by beam_order.
std::vector<ScoredSid> exhaustive_paths(ran::Ran& ran, std::span<const double> user_state);

/// Maps SIDs to items; SIDs with no item are dropped.
RankedList resolve_items(std::span<const ScoredSid> candidates, const index::PrefixTrie& trie);

struct DecodeOptions {
  std::size_t width = 20;
  bool constrained = true;
  ran::RanMode item_mode = ran::RanMode::kRedistribution;
};

/// One backbone invocation for the whole batch, then RAN beam search.
std::vector<RankedList> decode_compact(model::CompactModel& model, const item::Catalog& catalog,
                                       std::span<const std::vector<std::size_t>> histories,
                                       const DecodeOptions& options);

/// Autoregressive beam search over the flattened stream: L backbone
/// invocations per batch, each covering every live beam.
std::vector<RankedList> baseline_decode(model::FlattenedModel& model,
                                        const item::Catalog& catalog,
                                        std::span<const std::vector<std::size_t>> histories,
                                        std::size_t width, bool constrained = true);

/// Baseline SIDs with scores (before item resolution).
std::vector<std::vector<ScoredSid>> baseline_beam(model::FlattenedModel& model,
                                                  const item::Catalog& catalog,
                                                  std::span<const std::vector<std::size_t>> histories,
                                                  std::size_t width,
                                                  const index::PrefixTrie* trie);

/// Per-level log-softmax of flattened logits for one complete path (test oracle).
double baseline_path_log_prob(model::FlattenedModel& model, const item::Catalog& catalog,
                              std::span<const std::size_t> history, const index::SidCode& sid);

}  // namespace irr::decode
