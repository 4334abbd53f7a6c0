// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "irr/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "irr/error.hpp"

namespace irr::eval {

std::optional<std::size_t> rank_of(const decode::RankedList& ranked, const std::string& target) {
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (ranked[i].item == target) return i + 1;
  }
  return std::nullopt;
}

double recall_at_k(const decode::RankedList& ranked, const std::string& target, std::size_t k) {
  if (k == 0) throw ContractError("recall@k: k must be at least 1");
  const auto r = rank_of(ranked, target);
  return r && *r <= k ? 1.0 : 0.0;
}

double ndcg_at_k(const decode::RankedList& ranked, const std::string& target, std::size_t k) {
  if (k == 0) throw ContractError("ndcg@k: k must be at least 1");
  const auto r = rank_of(ranked, target);
  if (!r || *r > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(*r) + 1.0);
}

const MetricRow* Report::find(const std::string& metric, std::size_t k, const std::string& mode,
                              std::size_t W) const {
  for (const auto& r : rows) {
    if (r.metric != metric) continue;
    if (k && r.k != k) continue;
    if (!mode.empty() && r.mode != mode) continue;
    if (W && r.W != W) continue;
    return &r;
  }
  return nullptr;
}

void write_json_lines(const Report& report, std::ostream& out) {
  for (const auto& r : report.rows) {
    nlohmann::ordered_json j;
    j["metric"] = r.metric;
    j["k"] = r.k ? nlohmann::ordered_json(r.k) : nlohmann::ordered_json(nullptr);
    if (r.text.empty()) {
      j["value"] = r.value;
    } else {
      j["value"] = r.text;
    }
    j["setting"] = r.setting.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.setting);
    j["mode"] = r.mode.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.mode);
    j["W"] = r.W ? nlohmann::ordered_json(r.W) : nlohmann::ordered_json(nullptr);
    out << j.dump() << '\n';
  }
}

void write_table(const Report& report, std::ostream& out) {
  std::vector<std::array<std::string, 6>> cells{{"metric", "k", "value", "setting", "mode", "W"}};
  for (const auto& r : report.rows) {
    std::ostringstream v;
    if (r.text.empty()) {
      v << std::setprecision(6) << r.value;
    } else {
      v << r.text;
    }
    cells.push_back({r.metric, r.k ? std::to_string(r.k) : "-", v.str(),
                     r.setting.empty() ? "-" : r.setting, r.mode.empty() ? "-" : r.mode,
                     r.W ? std::to_string(r.W) : "-"});
  }
  std::array<std::size_t, 6> widths{};
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < 6; ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < 6; ++c) {
      out << std::left << std::setw(static_cast<int>(widths[c])) << row[c]
          << (c + 1 < 6 ? "  " : "\n");
    }
  }
}

EvalResult evaluate(model::CompactModel& model, const item::Catalog& catalog,
                    const data::InteractionLog& log, std::span<const data::UserSplit> splits,
                    const EvalOptions& options) {
  if (options.ks.empty()) throw ConfigError("evaluate: no cutoffs");
  EvalResult out;
  out.recall.assign(options.ks.size(), 0.0);
  out.ndcg.assign(options.ks.size(), 0.0);
  const std::size_t n = model.config().history;
  for (std::size_t start = 0; start < splits.size(); start += options.batch) {
    const std::size_t end = std::min(splits.size(), start + options.batch);
    std::vector<std::vector<std::size_t>> histories;
    std::vector<std::string> targets;
    for (std::size_t s = start; s < end; ++s) {
      std::vector<std::size_t> seq = splits[s].train;
      std::size_t target = splits[s].validation;
      if (!options.use_validation) {
        seq.push_back(splits[s].validation);
        target = splits[s].test;
      }
      histories.push_back(data::truncate_history(seq, n));
      targets.push_back(log.item_ids.at(target));
    }
    const auto ranked = decode::decode_compact(model, catalog, histories, options.decode);
    for (std::size_t u = 0; u < ranked.size(); ++u) {
      for (std::size_t i = 0; i < options.ks.size(); ++i) {
        out.recall[i] += recall_at_k(ranked[u], targets[u], options.ks[i]);
        out.ndcg[i] += ndcg_at_k(ranked[u], targets[u], options.ks[i]);
      }
    }
    out.users += ranked.size();
  }
  if (out.users) {
    for (std::size_t i = 0; i < options.ks.size(); ++i) {
      out.recall[i] /= static_cast<double>(out.users);
      out.ndcg[i] /= static_cast<double>(out.users);
    }
  }
  return out;
}

Report eval_report(const EvalResult& result, std::span<const std::size_t> ks,
                   const std::string& digest, const std::string& setting) {
  Report r;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    r.add({"recall", ks[i], result.recall[i], setting, "compact", 0, ""});
    r.add({"ndcg", ks[i], result.ndcg[i], setting, "compact", 0, ""});
  }
  r.add({"users", 0, static_cast<double>(result.users), setting, "", 0, ""});
  r.add({"config_digest", 0, 0.0, setting, "", 0, digest});
  return r;
}

}  // namespace irr::eval
