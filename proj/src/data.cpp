// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "irr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "irr/error.hpp"
#include "irr/rng.hpp"

namespace irr::data {

InteractionLog build_log(std::vector<Interaction> records) {
  InteractionLog log;
  log.records = std::move(records);
  std::unordered_map<std::string, std::size_t> users, items;
  std::vector<std::vector<std::pair<std::int64_t, std::size_t>>> stamped;  // (time, item)
  for (const auto& r : log.records) {
    auto [uit, new_user] = users.emplace(r.user, log.user_ids.size());
    if (new_user) {
      log.user_ids.push_back(r.user);
      stamped.emplace_back();
    }
    auto [iit, new_item] = items.emplace(r.item, log.item_ids.size());
    if (new_item) log.item_ids.push_back(r.item);
    stamped[uit->second].emplace_back(r.timestamp, iit->second);
  }
  for (auto& seq : stamped) {
    std::stable_sort(seq.begin(), seq.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::size_t> items_only;
    for (const auto& [t, i] : seq) items_only.push_back(i);
    log.sequences.push_back(std::move(items_only));
  }
  return log;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

}  // namespace

InteractionLog read_interactions(std::istream& in) {
  std::vector<Interaction> records;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw ParseError("expected 3 tab-separated fields, got " + std::to_string(fields.size()),
                       number);
    }
    if (fields[0].empty() || fields[1].empty()) throw ParseError("empty user or item id", number);
    Interaction r{fields[0], fields[1], 0};
    const auto& ts = fields[2];
    const auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), r.timestamp);
    if (ec != std::errc() || ptr != ts.data() + ts.size() || ts.empty()) {
      throw ParseError("timestamp '" + ts + "' is not an integer", number);
    }
    records.push_back(std::move(r));
  }
  return build_log(std::move(records));
}

InteractionLog ingest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read interactions " + path.string());
  return read_interactions(in);
}

void write_interactions(const InteractionLog& log, std::ostream& out) {
  out << "# user\titem\ttimestamp\n";
  for (const auto& r : log.records) out << r.user << '\t' << r.item << '\t' << r.timestamp << '\n';
}

InteractionLog five_core_filter(const InteractionLog& log, std::size_t k) {
  std::vector<Interaction> current = log.records;
  for (;;) {
    std::unordered_map<std::string, std::size_t> user_count, item_count;
    for (const auto& r : current) {
      ++user_count[r.user];
      ++item_count[r.item];
    }
    std::vector<Interaction> kept;
    kept.reserve(current.size());
    for (const auto& r : current) {
      if (user_count[r.user] >= k && item_count[r.item] >= k) kept.push_back(r);
    }
    if (kept.size() == current.size()) break;
    current = std::move(kept);
  }
  if (current.empty()) throw EmptyDatasetError("5-core filter removed every interaction");
  return build_log(std::move(current));
}

std::vector<UserSplit> leave_one_out_split(const InteractionLog& log) {
  std::vector<UserSplit> out;
  for (std::size_t u = 0; u < log.sequences.size(); ++u) {
    const auto& seq = log.sequences[u];
    if (seq.size() < 3) continue;
    UserSplit s;
    s.user = u;
    s.train.assign(seq.begin(), seq.end() - 2);
    s.validation = seq[seq.size() - 2];
    s.test = seq.back();
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::size_t> truncate_history(std::span<const std::size_t> seq, std::size_t history) {
  const std::size_t keep = std::min(seq.size(), history);
  return {seq.end() - static_cast<std::ptrdiff_t>(keep), seq.end()};
}

std::vector<model::Sample> training_samples(std::span<const UserSplit> splits,
                                            std::size_t history) {
  std::vector<model::Sample> out;
  for (const auto& s : splits) {
    for (std::size_t j = 1; j < s.train.size(); ++j) {
      out.push_back({truncate_history(std::span(s.train).first(j), history), s.train[j]});
    }
  }
  return out;
}

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return derive_seed(h ^ v, v); }

}  // namespace

SyntheticDataset make_synthetic_dataset(const SyntheticConfig& config) {
  if (config.rule_order == 0) throw ConfigError("synthetic: rule order must be at least 1");
  if (config.communities == 0 || config.items < config.communities) {
    throw ConfigError("synthetic: need at least one item per community");
  }
  if (config.min_length == 0 || config.max_length < config.min_length) {
    throw ConfigError("synthetic: invalid sequence length range");
  }
  if (config.content_dim < config.communities) {
    throw ConfigError("synthetic: content_dim must be at least the community count");
  }
  Rng rng(config.seed);
  SyntheticDataset ds;
  const std::size_t width = std::to_string(config.items - 1).size();
  auto item_name = [&](std::size_t i) {
    std::string s = std::to_string(i);
    return "i" + std::string(width - s.size(), '0') + s;
  };

  // community membership: a shuffled, evenly split catalog
  std::vector<std::size_t> order(config.items);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span(order));
  ds.community.assign(config.items, 0);
  std::vector<std::vector<std::size_t>> members(config.communities);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t c = r * config.communities / config.items;
    ds.community[order[r]] = c;
    members[c].push_back(order[r]);
  }

  // one cycle per community
  ds.successor.assign(config.items, 0);
  for (auto& m : members) {
    rng.shuffle(std::span(m));
    for (std::size_t j = 0; j < m.size(); ++j) ds.successor[m[j]] = m[(j + 1) % m.size()];
  }

  // orthogonal blob centres, pairwise distance = separation * spread
  const double offset = config.cluster_separation * config.cluster_spread / std::sqrt(2.0);
  ds.embeddings.matrix = DenseMatrix(config.items, config.content_dim);
  for (std::size_t i = 0; i < config.items; ++i) {
    ds.embeddings.item_ids.push_back(item_name(i));
    for (std::size_t p = 0; p < config.content_dim; ++p) {
      const double centre = p == ds.community[i] ? offset : 0.0;
      ds.embeddings.matrix(i, p) = centre + rng.normal(0.0, config.cluster_spread);
    }
  }

  auto next_item = [&](const std::vector<std::size_t>& seq) {
    const std::size_t last = seq.back();
    if (config.rule_order == 1) return ds.successor[last];
    std::uint64_t h = config.seed;
    const std::size_t span = std::min(seq.size(), config.rule_order);
    for (std::size_t j = seq.size() - span; j < seq.size(); ++j) h = mix(h, seq[j]);
    const auto& m = members[ds.community[last]];
    return m[h % m.size()];
  };

  std::vector<Interaction> records;
  const std::size_t span = config.max_length - config.min_length + 1;
  for (std::size_t u = 0; u < config.users; ++u) {
    std::vector<std::size_t> seq{rng.below(config.items)};
    const std::size_t len = config.min_length + rng.below(span);
    while (seq.size() < len) seq.push_back(next_item(seq));
    const std::string user = "u" + std::to_string(u);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      records.push_back({user, item_name(seq[t]), static_cast<std::int64_t>(1000 + t)});
    }
  }
  ds.log = build_log(std::move(records));
  return ds;
}

}  // namespace irr::data
