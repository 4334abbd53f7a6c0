// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0
//
// irr index|train|evaluate|bench|inspect|synth --config <path> [--set key=value ...]
// Exit codes: 0 ok, 2 configuration, 3 data, 4 runtime.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "irr/bench.hpp"
#include "irr/config.hpp"
#include "irr/error.hpp"
#include "irr/pipeline.hpp"

namespace fs = std::filesystem;

namespace irr {
namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::vector<std::string> items;  // inspect
  bool shared_pair = false;       // inspect
};

config::RunConfig load(const Options& o) { return config::load_config(o.config_path, o.overrides); }

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw DataError(std::string("missing ") + what + ": " + path);
}

fs::path report_path(const config::RunConfig& c, const std::string& name) {
  fs::create_directories(c.paths.report_dir);
  return fs::path(c.paths.report_dir) / name;
}

void write_report(const config::RunConfig& c, const eval::Report& r, const std::string& stem) {
  std::ofstream json(report_path(c, stem + ".jsonl"));
  eval::write_json_lines(r, json);
  std::ofstream table(report_path(c, stem + ".txt"));
  eval::write_table(r, table);
  eval::write_table(r, std::cout);
  if (!json || !table) throw RuntimeFailure("cannot write report " + stem);
}

pipeline::Workspace workspace(const config::RunConfig& c) {
  require_file(c.paths.interactions, "interactions");
  require_file(c.paths.sid_table, "SID table (run `irr index` first)");
  auto table = index::load_sid_table(c.paths.sid_table);
  if (table.levels() != c.model.levels || table.codebook_size() != c.model.codebook_size) {
    throw ConfigError("SID table has L=" + std::to_string(table.levels()) + " K=" +
                      std::to_string(table.codebook_size()) + " but config model.L=" +
                      std::to_string(c.model.levels) + " model.K=" +
                      std::to_string(c.model.codebook_size));
  }
  return pipeline::prepare(data::ingest(c.paths.interactions), std::move(table), c.model.history,
                           c.five_core);
}

model::CompactModel load_model(const config::RunConfig& c, const pipeline::Workspace& ws) {
  require_file(c.paths.checkpoint, "checkpoint");
  auto ckpt = train::load_checkpoint(c.paths.checkpoint);
  model::CompactModel m(c.resolved_model(), ws.catalog.size(), c.trainer.seed);
  auto params = m.parameters();
  train::restore_parameters(ckpt, params);
  return m;
}

int cmd_synth(const Options& o) {
  auto c = load(o);
  auto ds = data::make_synthetic_dataset(c.synthetic);
  if (auto dir = fs::path(c.paths.interactions).parent_path(); !dir.empty()) {
    fs::create_directories(dir);
  }
  std::ofstream out(c.paths.interactions);
  data::write_interactions(ds.log, out);
  if (!out) throw RuntimeFailure("cannot write " + c.paths.interactions);
  index::save_embeddings(ds.embeddings, c.paths.embeddings);
  std::cout << "synth: " << ds.log.users() << " users, " << ds.log.items() << " items, "
            << ds.log.records.size() << " interactions -> " << c.paths.interactions << ", "
            << c.paths.embeddings << '\n';
  return 0;
}

int cmd_index(const Options& o) {
  auto c = load(o);
  require_file(c.paths.embeddings, "embeddings");
  auto emb = index::load_embeddings(c.paths.embeddings);
  auto table = index::build_sid_table(emb, c.indexer);
  index::save_sid_table(table, c.paths.sid_table);
  std::cout << "index: " << table.size() << " items, L=" << table.levels()
            << " K=" << table.codebook_size() << " -> " << c.paths.sid_table << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  auto c = load(o);
  auto ws = workspace(c);
  model::CompactModel m(c.resolved_model(), ws.catalog.size(), c.trainer.seed);
  std::ofstream log(report_path(c, "train_log.tsv"));
  log << "epoch\tl_rec\tl_aln\ttotal\n";
  auto outcome = pipeline::train(m, ws, c, [&](const pipeline::EpochReport& r, train::Trainer&) {
    log << r.epoch << '\t' << r.metrics.rec << '\t' << r.metrics.aln << '\t' << r.metrics.total
        << '\n';
    std::cout << "epoch " << r.epoch << "  L_rec " << r.metrics.rec << "  L_aln "
              << r.metrics.aln << "  total " << r.metrics.total << '\n';
    return true;
  });
  auto params = m.parameters();
  train::save_checkpoint(
      train::make_checkpoint(params, outcome.optimizer, config::canonical_text(c), outcome.rng_state),
      c.paths.checkpoint);
  std::cout << "train: " << ws.samples.size() << " samples, checkpoint -> " << c.paths.checkpoint
            << '\n';
  return 0;
}

int cmd_evaluate(const Options& o) {
  auto c = load(o);
  auto ws = workspace(c);
  auto m = load_model(c, ws);
  auto result = eval::evaluate(m, ws.catalog, ws.log, ws.splits, pipeline::eval_options(c));
  write_report(c, eval::eval_report(result, c.ks, config::digest(c)), "eval");
  return 0;
}

int cmd_bench(const Options& o) {
  auto c = load(o);
  bench::BenchConfig b = c.bench;
  b.model = c.resolved_model();
  b.widths = c.widths;
  const std::string d = config::digest(c);
  auto compact = bench::bench_training(b, bench::Paradigm::kCompact);
  auto flat = bench::bench_training(b, bench::Paradigm::kFlattened);
  write_report(c, bench::training_report(compact, flat, d), "bench_train");
  for (auto s : {bench::Setting::kSac, bench::Setting::kSsl}) {
    auto inf = bench::bench_inference(b, s);
    std::string stem = std::string("bench_infer_") + bench::setting_name(s);
    std::transform(stem.begin(), stem.end(), stem.begin(), ::tolower);
    write_report(c, bench::inference_report(inf, d), stem);
  }
  return 0;
}

char shade(double p) {
  static const char ramp[] = " .:-=+*#%@";
  const int i = std::clamp(static_cast<int>(p * 9.999), 0, 9);
  return ramp[i];
}

int cmd_inspect(const Options& o) {
  auto c = load(o);
  auto ws = workspace(c);
  auto m = load_model(c, ws);
  std::vector<std::string> names = o.items;
  if (o.shared_pair) {
    // first two items whose semantic codes (all but the last level) coincide
    std::map<std::vector<std::uint32_t>, std::string> seen;
    for (const auto& id : ws.catalog.ids()) {
      const auto& code = ws.catalog.sid(ws.catalog.index_of(id)).codes;
      std::vector<std::uint32_t> prefix(code.begin(), code.end() - 1);
      auto [it, fresh] = seen.emplace(prefix, id);
      if (!fresh) {
        names = {it->second, id};
        break;
      }
    }
    if (names.empty()) throw DataError("inspect: no two items share a semantic prefix");
  }
  if (names.empty()) throw ConfigError("inspect: name items with --items or use --shared-pair");
  std::vector<std::size_t> rows;
  for (const auto& n : names) rows.push_back(ws.catalog.index_of(n));
  ad::Tape tape;
  auto emb = item::synthesize_item_embeddings(tape, m.ran, m.uid, ws.catalog, rows,
                                              ran::RanMode::kRedistribution);
  const std::size_t k = c.model.codebook_size;
  for (std::size_t l = 0; l < emb.trace.p.size(); ++l) {
    const auto& p = emb.trace.p[l].value();
    // at most 16 columns: the codes carrying the most mass across the items
    std::vector<std::size_t> cols(k);
    for (std::size_t j = 0; j < k; ++j) cols[j] = j;
    std::stable_sort(cols.begin(), cols.end(), [&](std::size_t a, std::size_t b) {
      double ma = 0.0, mb = 0.0;
      for (std::size_t r = 0; r < rows.size(); ++r) ma = std::max(ma, p(r, a)), mb = std::max(mb, p(r, b));
      return ma > mb;
    });
    cols.resize(std::min<std::size_t>(k, 16));
    std::sort(cols.begin(), cols.end());
    std::cout << "level " << l + 1 << "  p_l over codes (shade ' '..'@' = 0..1)\n";
    std::cout << std::setw(14) << "item" << "  sid ";
    for (auto j : cols) std::cout << std::setw(7) << j;
    std::cout << '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::cout << std::setw(14) << names[r] << "  " << std::setw(4) << emb.sids[r][l] << ' ';
      for (auto j : cols) {
        std::ostringstream cell;
        cell << std::fixed << std::setprecision(3) << p(r, j) << shade(p(r, j));
        std::cout << std::setw(7) << cell.str();
      }
      std::cout << '\n';
    }
  }
  std::cout << "sids:";
  for (std::size_t r = 0; r < rows.size(); ++r) std::cout << ' ' << names[r] << '=' << emb.sids[r].to_string();
  std::cout << '\n';
  return 0;
}

int run_guarded(int (*fn)(const Options&), const Options& o) {
  try {
    return fn(o);
  } catch (const ConfigError& e) {
    std::cerr << "irr: config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "irr: data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "irr: error: " << e.what() << '\n';
    return 4;
  }
}

}  // namespace
}  // namespace irr

int main(int argc, char** argv) {
  using namespace irr;
  CLI::App app{"irr: semantic-ID generative recommender"};
  app.require_subcommand(1);
  Options o;
  using Fn = int (*)(const Options&);
  std::vector<std::pair<CLI::App*, Fn>> commands;
  auto add = [&](const char* name, const char* help, Fn fn) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config_path, "key=value config file (empty: defaults)");
    sub->add_option("--set", o.overrides, "override, key=value (repeatable)");
    commands.emplace_back(sub, fn);
    return sub;
  };
  add("synth", "write the synthetic interaction log and content embeddings", cmd_synth);
  add("index", "build the SID table from content embeddings", cmd_index);
  add("train", "train and write a checkpoint plus loss log", cmd_train);
  add("evaluate", "leave-one-out Recall/NDCG report", cmd_evaluate);
  add("bench", "throughput and latency reports for both paradigms", cmd_bench);
  auto* inspect = add("inspect", "per-level assignment tables for named items", cmd_inspect);
  inspect->add_option("--items", o.items, "item ids")->delimiter(',');
  inspect->add_flag("--shared-pair", o.shared_pair, "pick two items sharing a semantic prefix");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "irr: usage error: " << e.what() << '\n';
    return 2;
  }
  for (auto& [sub, fn] : commands) {
    if (sub->parsed()) return run_guarded(fn, o);
  }
  return 2;
}
