// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "irr/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "irr/error.hpp"

namespace irr::decode {

bool beam_order(const ScoredSid& a, const ScoredSid& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.sid < b.sid;
}

namespace {

struct Live {
  std::size_t user = 0;
  ScoredSid partial;
};

// Expands every live row r with the codes allowed after its path, scoring
// log probs[r][c], and keeps the best `width` per user.
std::vector<Live> expand(const std::vector<Live>& live, const DenseMatrix& probs,
                         std::size_t users, std::size_t width, const index::PrefixTrie* trie) {
  std::vector<std::vector<Live>> per_user(users);
  for (std::size_t r = 0; r < live.size(); ++r) {
    const auto& path = live[r].partial.sid.codes;
    std::vector<std::uint32_t> allowed;
    if (trie) {
      allowed = trie->children(path);
    } else {
      allowed.resize(probs.cols());
      for (std::uint32_t c = 0; c < probs.cols(); ++c) allowed[c] = c;
    }
    for (auto c : allowed) {
      Live next = live[r];
      next.partial.sid.codes.push_back(c);
      next.partial.log_prob += std::log(probs(r, c));
      per_user[live[r].user].push_back(std::move(next));
    }
  }
  std::vector<Live> out;
  for (auto& cands : per_user) {
    const auto keep = std::min(width, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Live& a, const Live& b) { return beam_order(a.partial, b.partial); });
    for (std::size_t i = 0; i < keep; ++i) out.push_back(std::move(cands[i]));
  }
  return out;
}

std::vector<std::vector<ScoredSid>> collect(const std::vector<Live>& live, std::size_t users) {
  std::vector<std::vector<ScoredSid>> out(users);
  for (const auto& l : live) out[l.user].push_back(l.partial);
  return out;
}

std::vector<Live> initial_beams(std::size_t users) {
  std::vector<Live> live(users);
  for (std::size_t u = 0; u < users; ++u) live[u].user = u;
  return live;
}

}  // namespace

std::vector<std::vector<ScoredSid>> beam_search(ran::Ran& ran, const DenseMatrix& user_states,
                                                std::size_t width,
                                                const index::PrefixTrie* trie) {
  if (width == 0) throw ContractError("beam_search: width must be at least 1");
  const std::size_t users = user_states.rows();
  std::vector<Live> live = initial_beams(users);
  for (std::size_t level = 1; level <= ran.levels() && !live.empty(); ++level) {
    ad::Tape tape;
    DenseMatrix x(live.size(), user_states.cols());
    for (std::size_t r = 0; r < live.size(); ++r) {
      std::copy(user_states.row(live[r].user).begin(), user_states.row(live[r].user).end(),
                x.row(r).begin());
    }
    ad::Var xv = tape.constant(std::move(x));
    ad::Var prefix;
    for (std::size_t j = 1; j < level; ++j) {
      std::vector<std::size_t> codes(live.size());
      for (std::size_t r = 0; r < live.size(); ++r) codes[r] = live[r].partial.sid[j - 1];
      prefix = ran.next_prefix(prefix, ran.aggregate_context(tape, xv, codes, j,
                                                             ran::RanMode::kTeacherForcing));
    }
    ad::Var p = ran.assign_distribution(tape, ran.fuse_hidden(tape, xv, prefix, level), level);
    live = expand(live, p.value(), users, width, trie);
  }
  return collect(live, users);
}

std::vector<ScoredSid> exhaustive_paths(ran::Ran& ran, std::span<const double> user_state) {
  const std::size_t k = ran.config().codebook_size;
  const std::size_t levels = ran.levels();
  std::size_t total = 1;
  for (std::size_t l = 0; l < levels; ++l) total *= k;
  std::vector<index::SidCode> sids(total);
  DenseMatrix x(total, user_state.size());
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rest = i;
    sids[i].codes.assign(levels, 0);
    for (std::size_t l = levels; l-- > 0;) {
      sids[i].codes[l] = static_cast<std::uint32_t>(rest % k);
      rest /= k;
    }
    std::copy(user_state.begin(), user_state.end(), x.row(i).begin());
  }
  ad::Tape tape;
  const auto trace = ran.run_recursive(tape, tape.constant(std::move(x)),
                                       ran::RanMode::kTeacherForcing, sids);
  std::vector<ScoredSid> out;
  for (std::size_t i = 0; i < total; ++i) out.push_back({sids[i], ran::path_log_prob(trace, sids[i], i)});
  std::sort(out.begin(), out.end(), beam_order);
  return out;
}

RankedList resolve_items(std::span<const ScoredSid> candidates, const index::PrefixTrie& trie) {
  RankedList out;
  for (const auto& c : candidates) {
    if (const std::string* item = trie.find(c.sid.codes)) out.push_back({*item, c.log_prob});
  }
  return out;
}

std::vector<RankedList> decode_compact(model::CompactModel& model, const item::Catalog& catalog,
                                       std::span<const std::vector<std::size_t>> histories,
                                       const DecodeOptions& options) {
  DenseMatrix states;
  {
    ad::Tape tape;
    auto fwd = model::encode_compact(tape, model, catalog, histories, {}, options.item_mode);
    states = fwd.user_states.value();
  }
  const auto beams = beam_search(model.user_ran(), states, options.width,
                                 options.constrained ? &catalog.trie() : nullptr);
  std::vector<RankedList> out;
  for (const auto& b : beams) out.push_back(resolve_items(b, catalog.trie()));
  return out;
}

namespace {

// Most recent history items plus the chosen codes, trimmed from the oldest
// item so the stream fits the trained position range.
std::vector<std::size_t> decode_stream(const model::FlattenedModel& model,
                                       const item::Catalog& catalog,
                                       std::span<const std::size_t> history,
                                       std::span<const std::uint32_t> chosen) {
  const std::size_t levels = model.config().levels;
  const std::size_t max_seq = model.backbone.config().max_seq;
  std::size_t keep = history.size();
  while (keep > 0 && keep * levels + chosen.size() > max_seq) --keep;
  auto stream = flatten_items(model, catalog, history.subspan(history.size() - keep));
  for (std::size_t j = 0; j < chosen.size(); ++j) {
    stream.push_back(model.token_id(j + 1, chosen[j]));
  }
  if (stream.empty()) throw ContractError("baseline decode: empty stream");
  return stream;
}

DenseMatrix level_probs(ad::Tape& tape, model::FlattenedModel& model,
                        std::span<const std::vector<std::size_t>> streams, std::size_t level) {
  auto fwd = model::encode_flattened(tape, model, streams);
  ad::Var last = model::Backbone::last_states(fwd.outputs, fwd.steps, fwd.lengths);
  return ad::softmax_rows(ad::matmul_nt(last, tape.param(model.head(level)))).value();
}

}  // namespace

std::vector<std::vector<ScoredSid>> baseline_beam(model::FlattenedModel& model,
                                                  const item::Catalog& catalog,
                                                  std::span<const std::vector<std::size_t>> histories,
                                                  std::size_t width,
                                                  const index::PrefixTrie* trie) {
  if (width == 0) throw ContractError("baseline decode: width must be at least 1");
  const std::size_t users = histories.size();
  std::vector<Live> live = initial_beams(users);
  for (std::size_t level = 1; level <= model.config().levels && !live.empty(); ++level) {
    std::vector<std::vector<std::size_t>> streams;
    streams.reserve(live.size());
    for (const auto& l : live) {
      streams.push_back(decode_stream(model, catalog, histories[l.user], l.partial.sid.codes));
    }
    ad::Tape tape;
    live = expand(live, level_probs(tape, model, streams, level), users, width, trie);
  }
  return collect(live, users);
}

std::vector<RankedList> baseline_decode(model::FlattenedModel& model,
                                        const item::Catalog& catalog,
                                        std::span<const std::vector<std::size_t>> histories,
                                        std::size_t width, bool constrained) {
  const auto beams =
      baseline_beam(model, catalog, histories, width, constrained ? &catalog.trie() : nullptr);
  std::vector<RankedList> out;
  for (const auto& b : beams) out.push_back(resolve_items(b, catalog.trie()));
  return out;
}

double baseline_path_log_prob(model::FlattenedModel& model, const item::Catalog& catalog,
                              std::span<const std::size_t> history, const index::SidCode& sid) {
  double total = 0.0;
  for (std::size_t level = 1; level <= sid.size(); ++level) {
    const std::vector<std::size_t> stream = decode_stream(
        model, catalog, history, std::span(sid.codes).first(level - 1));
    ad::Tape tape;
    const auto probs = level_probs(tape, model, std::span(&stream, 1), level);
    total += std::log(probs(0, sid[level - 1]));
  }
  return total;
}

}  // namespace irr::decode
