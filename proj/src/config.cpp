// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "irr/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

#include "irr/error.hpp"

namespace irr::config {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("config key '" + key + "': '" + value + "' is not " + want);
}

std::size_t to_count(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size()) {
    bad_value(key, v, "a non-negative integer");
  }
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) bad_value(key, v, "a number");
    return out;
  } catch (const std::logic_error&) {
    bad_value(key, v, "a number");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::size_t> to_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(to_count(key, trim(item)));
  if (out.empty()) bad_value(key, v, "a comma-separated list");
  return out;
}

std::string real_text(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string list_text(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Entry {
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Field>
Entry count_entry(Field field) {
  return {[field](RunConfig& c, const std::string& k, const std::string& v) {
            field(c) = static_cast<std::remove_reference_t<decltype(field(c))>>(to_count(k, v));
          },
          [field](const RunConfig& c) {
            return std::to_string(field(const_cast<RunConfig&>(c)));
          }};
}

template <class Field>
Entry real_entry(Field field) {
  return {[field](RunConfig& c, const std::string& k, const std::string& v) { field(c) = to_real(k, v); },
          [field](const RunConfig& c) { return real_text(field(const_cast<RunConfig&>(c))); }};
}

template <class Field>
Entry bool_entry(Field field) {
  return {[field](RunConfig& c, const std::string& k, const std::string& v) { field(c) = to_bool(k, v); },
          [field](const RunConfig& c) {
            return std::string(field(const_cast<RunConfig&>(c)) ? "true" : "false");
          }};
}

template <class Field>
Entry list_entry(Field field) {
  return {[field](RunConfig& c, const std::string& k, const std::string& v) { field(c) = to_list(k, v); },
          [field](const RunConfig& c) { return list_text(field(const_cast<RunConfig&>(c))); }};
}

template <class Field>
Entry text_entry(Field field) {
  return {[field](RunConfig& c, const std::string&, const std::string& v) { field(c) = v; },
          [field](const RunConfig& c) { return field(const_cast<RunConfig&>(c)); }};
}

#define IRR_FIELD(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::map<std::string, Entry>& entries() {
  static const std::map<std::string, Entry> table = {
      {"indexer.L", count_entry(IRR_FIELD(indexer.levels))},
      {"indexer.K", count_entry(IRR_FIELD(indexer.codebook_size))},
      {"indexer.seed", count_entry(IRR_FIELD(indexer.seed))},
      {"indexer.max_iters", count_entry(IRR_FIELD(indexer.max_iters))},
      {"indexer.dedup_level", bool_entry(IRR_FIELD(indexer.dedup_level))},
      {"indexer.balanced", bool_entry(IRR_FIELD(indexer.balanced))},
      {"model.L", count_entry(IRR_FIELD(model.levels))},
      {"model.K", count_entry(IRR_FIELD(model.codebook_size))},
      {"model.d", count_entry(IRR_FIELD(model.dim))},
      {"model.layers", count_entry(IRR_FIELD(model.layers))},
      {"model.heads", count_entry(IRR_FIELD(model.heads))},
      {"model.N", count_entry(IRR_FIELD(model.history))},
      {"model.cumulative_prefix", bool_entry(IRR_FIELD(model.cumulative_prefix))},
      {"model.flattened_max_seq", count_entry(IRR_FIELD(flattened_max_seq))},
      {"trainer.lr", real_entry(IRR_FIELD(trainer.lr))},
      {"trainer.weight_decay", real_entry(IRR_FIELD(trainer.weight_decay))},
      {"trainer.batch_size", count_entry(IRR_FIELD(trainer.batch_size))},
      {"trainer.epochs", count_entry(IRR_FIELD(trainer.epochs))},
      {"trainer.lambda", real_entry(IRR_FIELD(trainer.lambda))},
      {"trainer.seed", count_entry(IRR_FIELD(trainer.seed))},
      {"trainer.clip_norm", real_entry(IRR_FIELD(trainer.clip_norm))},
      {"trainer.user_side_tf", bool_entry(IRR_FIELD(trainer.user_side_tf))},
      {"trainer.use_aln", bool_entry(IRR_FIELD(trainer.use_aln))},
      {"trainer.redistribution", bool_entry(IRR_FIELD(trainer.redistribution))},
      {"trainer.shared_ran", bool_entry(IRR_FIELD(trainer.shared_ran))},
      {"decoder.W", list_entry(IRR_FIELD(widths))},
      {"decoder.eval_W", count_entry(IRR_FIELD(eval_width))},
      {"decoder.constrained", bool_entry(IRR_FIELD(constrained))},
      {"eval.ks", list_entry(IRR_FIELD(ks))},
      {"data.five_core", bool_entry(IRR_FIELD(five_core))},
      {"synthetic.users", count_entry(IRR_FIELD(synthetic.users))},
      {"synthetic.items", count_entry(IRR_FIELD(synthetic.items))},
      {"synthetic.communities", count_entry(IRR_FIELD(synthetic.communities))},
      {"synthetic.rule_order", count_entry(IRR_FIELD(synthetic.rule_order))},
      {"synthetic.min_length", count_entry(IRR_FIELD(synthetic.min_length))},
      {"synthetic.max_length", count_entry(IRR_FIELD(synthetic.max_length))},
      {"synthetic.content_dim", count_entry(IRR_FIELD(synthetic.content_dim))},
      {"synthetic.seed", count_entry(IRR_FIELD(synthetic.seed))},
      {"bench.items", count_entry(IRR_FIELD(bench.items))},
      {"bench.batch", count_entry(IRR_FIELD(bench.batch))},
      {"bench.warmup", count_entry(IRR_FIELD(bench.warmup))},
      {"bench.timed", count_entry(IRR_FIELD(bench.timed))},
      {"bench.infer_batch", count_entry(IRR_FIELD(bench.infer_batch))},
      {"bench.repeats", count_entry(IRR_FIELD(bench.infer_repeats))},
      {"bench.seed", count_entry(IRR_FIELD(bench.seed))},
      {"paths.embeddings", text_entry(IRR_FIELD(paths.embeddings))},
      {"paths.interactions", text_entry(IRR_FIELD(paths.interactions))},
      {"paths.sid_table", text_entry(IRR_FIELD(paths.sid_table))},
      {"paths.checkpoint", text_entry(IRR_FIELD(paths.checkpoint))},
      {"paths.report_dir", text_entry(IRR_FIELD(paths.report_dir))},
  };
  return table;
}

#undef IRR_FIELD

}  // namespace

std::size_t RunConfig::resolved_eval_width() const {
  if (eval_width) return eval_width;
  return 2 * *std::max_element(ks.begin(), ks.end());
}

model::ModelConfig RunConfig::resolved_model() const {
  model::ModelConfig m = model;
  m.shared_ran = trainer.shared_ran;
  return m;
}

void apply(RunConfig& config, const std::string& key, const std::string& value) {
  const auto& table = entries();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(config, key, value);
}

namespace {

void apply_line(RunConfig& config, const std::string& raw, const std::string& where) {
  const std::string line = trim(raw);
  if (line.empty() || line.front() == '#') return;
  const auto eq = line.find('=');
  if (eq == std::string::npos) {
    throw ConfigError(where + ": expected key=value, got '" + line + "'");
  }
  apply(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
}

}  // namespace

RunConfig parse_config(std::istream& in, const std::vector<std::string>& overrides) {
  RunConfig config;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    apply_line(config, line, "config line " + std::to_string(number));
  }
  for (const auto& o : overrides) apply_line(config, o, "override");
  validate(config);
  return config;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  if (path.empty()) {
    std::istringstream empty;
    return parse_config(empty, overrides);
  }
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  return parse_config(in, overrides);
}

void validate(const RunConfig& c) {
  if (c.indexer.levels != c.model.levels) {
    throw ConfigError("config key 'indexer.L' (" + std::to_string(c.indexer.levels) +
                      ") must equal 'model.L' (" + std::to_string(c.model.levels) + ")");
  }
  if (c.indexer.codebook_size != c.model.codebook_size) {
    throw ConfigError("config key 'indexer.K' (" + std::to_string(c.indexer.codebook_size) +
                      ") must equal 'model.K' (" + std::to_string(c.model.codebook_size) + ")");
  }
  if (c.model.levels == 0) throw ConfigError("config key 'model.L' must be at least 1");
  if (c.model.codebook_size == 0) throw ConfigError("config key 'model.K' must be at least 1");
  if (c.model.history == 0) throw ConfigError("config key 'model.N' must be at least 1");
  if (c.model.dim == 0) throw ConfigError("config key 'model.d' must be at least 1");
  if (c.model.heads == 0 || c.model.dim % c.model.heads != 0) {
    throw ConfigError("config key 'model.heads' must divide 'model.d'");
  }
  if (c.model.layers == 0) throw ConfigError("config key 'model.layers' must be at least 1");
  if (c.flattened_max_seq != 0 && c.flattened_max_seq < c.model.history * c.model.levels) {
    throw ConfigError("config key 'model.flattened_max_seq' (" +
                      std::to_string(c.flattened_max_seq) + ") must be at least N*L = " +
                      std::to_string(c.model.history * c.model.levels));
  }
  if (c.indexer.dedup_level && c.indexer.levels < 2) {
    throw ConfigError("config key 'indexer.dedup_level' needs indexer.L >= 2");
  }
  try {
    c.trainer.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.ks.empty() || std::find(c.ks.begin(), c.ks.end(), 0u) != c.ks.end()) {
    throw ConfigError("config key 'eval.ks' must list positive cutoffs");
  }
  if (std::find(c.widths.begin(), c.widths.end(), 0u) != c.widths.end()) {
    throw ConfigError("config key 'decoder.W' must list positive widths");
  }
  if (c.bench.timed == 0) throw ConfigError("config key 'bench.timed' must be at least 1");
}

std::string canonical_text(const RunConfig& config) {
  std::string out;
  for (const auto& [key, entry] : entries()) out += key + "=" + entry.get(config) + "\n";
  return out;
}

std::string digest(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_text(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& [key, entry] : entries()) out.push_back(key);
  return out;
}

}  // namespace irr::config
