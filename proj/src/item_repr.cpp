// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "irr/item_repr.hpp"

#include <cmath>

#include "irr/error.hpp"

namespace irr::item {

Catalog::Catalog(std::vector<std::string> item_ids, const index::SidTable& table)
    : ids_(std::move(item_ids)),
      trie_(table.levels()),
      levels_(table.levels()),
      codebook_size_(table.codebook_size()) {
  sids_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!by_id_.emplace(ids_[i], i).second) {
      throw DataError("catalog: duplicate item '" + ids_[i] + "'");
    }
    sids_.push_back(table.at(ids_[i]));
    trie_.insert(sids_.back(), ids_[i]);
  }
}

const index::SidCode& Catalog::sid(std::size_t item) const {
  if (item >= sids_.size()) {
    throw LookupError("catalog: item index " + std::to_string(item) + " outside " +
                      std::to_string(sids_.size()) + " items");
  }
  return sids_[item];
}

std::size_t Catalog::index_of(const std::string& item_id) const {
  auto it = by_id_.find(item_id);
  if (it == by_id_.end()) throw LookupError("catalog: unknown item '" + item_id + "'");
  return it->second;
}

ad::Parameter make_uid_table(std::size_t items, std::size_t dim, Rng& rng,
                             const std::string& name) {
  DenseMatrix m(items, dim);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& v : m.values()) v = rng.normal(0.0, stddev);
  return {name, std::move(m)};
}

ItemEmbeddings synthesize_item_embeddings(ad::Tape& tape, ran::Ran& ran, ad::Parameter& uid,
                                          const Catalog& catalog,
                                          std::span<const std::size_t> items, ran::RanMode mode) {
  ItemEmbeddings out;
  out.items.assign(items.begin(), items.end());
  for (auto i : items) {
    if (i >= uid.value.rows()) {
      throw LookupError("item side: no UID row for item " + std::to_string(i));
    }
    out.sids.push_back(catalog.sid(i));
  }
  ad::Var x = ad::gather_rows(tape.param(uid), out.items);
  // SIDs are always supplied: TeacherForcing needs them, and alignment scores against them.
  out.trace = ran.run_recursive(tape, x, mode, out.sids);
  if (mode == ran::RanMode::kRedistribution) out.trace.sids = out.sids;
  out.embeddings = ran::sum_contexts(out.trace);
  return out;
}

ad::Var alignment_loss(const ItemEmbeddings& items) {
  return ran::path_nll(items.trace, items.sids);
}

}  // namespace irr::item
