// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "irr/data.hpp"
#include "irr/decoder.hpp"

namespace irr::eval {

/// 1-based rank of `target` in `ranked`, if present.
std::optional<std::size_t> rank_of(const decode::RankedList& ranked, const std::string& target);
double recall_at_k(const decode::RankedList& ranked, const std::string& target, std::size_t k);
double ndcg_at_k(const decode::RankedList& ranked, const std::string& target, std::size_t k);

/// One report line. Empty `setting`/`mode` and k = 0 / W = 0 are "not applicable".
struct MetricRow {
  std::string metric;
  std::size_t k = 0;
  double value = 0.0;
  std::string setting;
  std::string mode;
  std::size_t W = 0;
  std::string text;  // non-numeric value (e.g. a digest); written instead of `value` if set
};

struct Report {
  std::vector<MetricRow> rows;

  void add(MetricRow row) { rows.push_back(std::move(row)); }
  /// First row with this metric (and k when nonzero), or nullptr.
  const MetricRow* find(const std::string& metric, std::size_t k = 0,
                        const std::string& mode = "", std::size_t W = 0) const;
};

void write_json_lines(const Report& report, std::ostream& out);
void write_table(const Report& report, std::ostream& out);

struct EvalOptions {
  std::vector<std::size_t> ks{5, 10};
  decode::DecodeOptions decode;  // width defaults to 2 * max(k)
  std::size_t batch = 64;
  bool use_validation = false;   // score the validation item instead of test
};

struct EvalResult {
  std::vector<double> recall, ndcg;  // aligned with ks
  std::size_t users = 0;
};

/// Leave-one-out evaluation: history = train prefix (+ validation item when
/// scoring test), truncated to N.
EvalResult evaluate(model::CompactModel& model, const item::Catalog& catalog,
                    const data::InteractionLog& log, std::span<const data::UserSplit> splits,
                    const EvalOptions& options);

/// Recall@k / NDCG@k rows plus users and a config digest row.
Report eval_report(const EvalResult& result, std::span<const std::size_t> ks,
                   const std::string& digest, const std::string& setting = "test");

}  // namespace irr::eval
