// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Model containers for the two paradigms and their batched forward passes:
//   - CompactModel: RAN + UID table + compact backbone (one token per item);
//   - FlattenedModel: the same backbone over L tokens per item with
//     per-level token vocabularies and output heads.

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "irr/backbone.hpp"
#include "irr/item_repr.hpp"
#include "irr/ran.hpp"

namespace irr::model {

struct ModelConfig {
  std::size_t levels = 4;
  std::size_t codebook_size = 128;
  std::size_t dim = 32;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t history = 30;  // N
  bool cumulative_prefix = true;
  /// false: the user side gets its own RAN, initialized as a copy of the item side's.
  bool shared_ran = true;

  ran::RanConfig ran_config() const;
};

/// One next-item example: the most recent items (oldest first) and the item that followed.
struct Sample {
  std::vector<std::size_t> history;
  std::size_t target = 0;
};

class CompactModel {
 public:
  CompactModel() = default;
  CompactModel(const ModelConfig& config, std::size_t items, std::uint64_t seed);

  ran::Ran& user_ran() { return user_ran_ ? *user_ran_ : ran; }
  bool shared() const noexcept { return !user_ran_.has_value(); }
  const ModelConfig& config() const noexcept { return config_; }
  std::vector<ad::Parameter*> parameters();

  ran::Ran ran;  // item side (and user side when shared)
  ad::Parameter uid;
  Backbone backbone;

 private:
  ModelConfig config_;
  std::optional<ran::Ran> user_ran_;
};

struct CompactForward {
  item::ItemEmbeddings items;  // item-side pass over the unique batch items
  ad::Var user_states;         // B x d
  std::vector<std::size_t> lengths;
  std::size_t steps = 0;       // backbone positions of this batch
};

/// Item side over the unique items of `histories` plus `extra_items`, then one
/// backbone invocation over the histories. Histories longer than N are a ContractError.
CompactForward encode_compact(ad::Tape& tape, CompactModel& model, const item::Catalog& catalog,
                              std::span<const std::vector<std::size_t>> histories,
                              std::span<const std::size_t> extra_items = {},
                              ran::RanMode item_mode = ran::RanMode::kRedistribution);

class FlattenedModel {
 public:
  FlattenedModel() = default;
  /// Backbone max_seq = N * L.
  FlattenedModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  std::vector<ad::Parameter*> parameters();
  /// Global token id of code `code` at 1-based `level`.
  std::size_t token_id(std::size_t level, std::uint32_t code) const {
    return (level - 1) * config_.codebook_size + code;
  }
  ad::Parameter& head(std::size_t level) { return heads_.at(level - 1); }

  Backbone backbone;
  ad::Parameter tokens;  // (L*K) x d

 private:
  ModelConfig config_;
  std::vector<ad::Parameter> heads_;  // per level, K x d
};

/// Token stream of `items` (oldest first), L tokens per item.
std::vector<std::size_t> flatten_items(const FlattenedModel& model, const item::Catalog& catalog,
                                       std::span<const std::size_t> items);

struct FlatForward {
  ad::Var outputs;  // (B*steps) x d
  std::vector<std::size_t> lengths;
  std::size_t steps = 0;
};

/// One backbone invocation over padded token streams.
FlatForward encode_flattened(ad::Tape& tape, FlattenedModel& model,
                             std::span<const std::vector<std::size_t>> streams);

/// Next-token cross-entropy at every stream position; the last history
/// position predicts the target's first code. Mean over positions.
ad::Var flattened_loss(ad::Tape& tape, FlattenedModel& model, const item::Catalog& catalog,
                       std::span<const Sample> batch);

}  // namespace irr::model
