// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Item side: UID embeddings guide the RAN to synthesize E_i = z_1 + ... + z_L,
// and the alignment loss scores the item's own SID under those distributions.

#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "irr/indexer.hpp"
#include "irr/ran.hpp"

namespace irr::item {

/// Dense item indices 0..n-1 with their ids and SIDs.
class Catalog {
 public:
  Catalog() = default;
  /// SIDs looked up in `table` in the order of `item_ids`; unknown ids throw LookupError.
  Catalog(std::vector<std::string> item_ids, const index::SidTable& table);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t levels() const noexcept { return levels_; }
  std::size_t codebook_size() const noexcept { return codebook_size_; }
  const std::string& id(std::size_t item) const { return ids_.at(item); }
  const index::SidCode& sid(std::size_t item) const;
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  /// Throws LookupError for an unknown id.
  std::size_t index_of(const std::string& item_id) const;
  const index::PrefixTrie& trie() const noexcept { return trie_; }

 private:
  std::vector<std::string> ids_;
  std::vector<index::SidCode> sids_;
  std::unordered_map<std::string, std::size_t> by_id_;
  index::PrefixTrie trie_;
  std::size_t levels_ = 0;
  std::size_t codebook_size_ = 0;
};

/// |I| x d trainable table, rows ~ N(0, 1/sqrt(d)).
ad::Parameter make_uid_table(std::size_t items, std::size_t dim, Rng& rng,
                             const std::string& name = "uid");

struct ItemEmbeddings {
  std::vector<std::size_t> items;  // row r describes items[r]
  std::vector<index::SidCode> sids;
  ad::Var embeddings;              // rows x d, sum of trace contexts
  ran::RanTrace trace;
};

/// Runs the RAN with x = e_uid for every listed item. Redistribution is the
/// default; TeacherForcing reproduces the hard lookup sum of V_l[c_l].
ItemEmbeddings synthesize_item_embeddings(ad::Tape& tape, ran::Ran& ran, ad::Parameter& uid,
                                          const Catalog& catalog,
                                          std::span<const std::size_t> items,
                                          ran::RanMode mode = ran::RanMode::kRedistribution);

/// Mean over the listed items of sum_l -log p_l[c_l].
ad::Var alignment_loss(const ItemEmbeddings& items);

}  // namespace irr::item
