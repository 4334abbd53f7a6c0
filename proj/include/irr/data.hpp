// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Interaction logs, 5-core filtering, leave-one-out splits and the seeded
// synthetic Markov workload.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "irr/indexer.hpp"
#include "irr/model.hpp"

namespace irr::data {

struct Interaction {
  std::string user;
  std::string item;
  std::int64_t timestamp = 0;
};

/// Records plus per-user sequences of dense item indices, ordered by
/// (timestamp, input order). Users and items are numbered by first appearance.
struct InteractionLog {
  std::vector<Interaction> records;
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::vector<std::vector<std::size_t>> sequences;  // per user

  std::size_t users() const noexcept { return user_ids.size(); }
  std::size_t items() const noexcept { return item_ids.size(); }
};

/// Rebuilds ids and sequences from records (stable timestamp ordering).
InteractionLog build_log(std::vector<Interaction> records);

/// `user<TAB>item<TAB>timestamp`; '#' lines and blank lines skipped.
InteractionLog read_interactions(std::istream& in);
InteractionLog ingest(const std::filesystem::path& path);
void write_interactions(const InteractionLog& log, std::ostream& out);

/// Drops users and items with fewer than `k` interactions until nothing
/// changes. Throws EmptyDatasetError if nothing survives.
InteractionLog five_core_filter(const InteractionLog& log, std::size_t k = 5);

struct UserSplit {
  std::size_t user = 0;
  std::vector<std::size_t> train;
  std::size_t validation = 0;
  std::size_t test = 0;
};

/// Users with at least 3 interactions: train prefix, second-to-last, last.
std::vector<UserSplit> leave_one_out_split(const InteractionLog& log);

/// One sample per train-prefix position j >= 1: the up-to-N items before j and item j.
std::vector<model::Sample> training_samples(std::span<const UserSplit> splits,
                                            std::size_t history);

/// Most recent `history` items of `seq`.
std::vector<std::size_t> truncate_history(std::span<const std::size_t> seq, std::size_t history);

struct SyntheticConfig {
  std::size_t users = 2000;
  std::size_t items = 500;
  std::size_t communities = 4;
  std::size_t rule_order = 1;
  std::size_t min_length = 7;
  std::size_t max_length = 9;
  std::size_t content_dim = 16;
  double cluster_spread = 1.0;       // sigma of each blob
  double cluster_separation = 12.0;  // distance between blob centres, in sigmas
  std::uint64_t seed = 7;
};

struct SyntheticDataset {
  InteractionLog log;
  index::ContentEmbeddings embeddings;
  std::vector<std::size_t> community;  // per item index
  /// Successor of each item under the order-1 rule.
  std::vector<std::size_t> successor;
};

/// Items split evenly into communities; within each community a seeded cycle
/// defines the transition rule (order r > 1 mixes the last r items through a
/// deterministic hash). Content embeddings are Gaussian blobs per community.
SyntheticDataset make_synthetic_dataset(const SyntheticConfig& config);

}  // namespace irr::data
