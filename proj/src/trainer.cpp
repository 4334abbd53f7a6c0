// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "irr/trainer.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "irr/error.hpp"

namespace irr::train {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("trainer.lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("trainer.weight_decay must be non-negative");
  if (batch_size == 0) throw ConfigError("trainer.batch_size must be positive");
  if (lambda < 0.0) throw ConfigError("trainer.lambda must be non-negative");
  if (clip_norm < 0.0) throw ConfigError("trainer.clip_norm must be non-negative");
}

ad::Var rec_loss(ad::Tape& tape, ran::Ran& ran, ad::Var user_states,
                 std::span<const index::SidCode> targets, ran::RanMode mode) {
  const auto trace = ran.run_recursive(tape, user_states, mode, targets);
  return ran::path_nll(trace, targets);
}

double total_loss(double l_rec, double l_aln, double lambda) {
  if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
  return l_rec + lambda * l_aln;
}

ad::Var total_loss(ad::Var l_rec, ad::Var l_aln, double lambda) {
  if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
  return ad::add(l_rec, ad::scale(l_aln, lambda));
}

// ---------------------------------------------------------------------------

Adam::Adam(std::span<ad::Parameter* const> params) {
  for (const auto* p : params) {
    state_.m.emplace_back(p->value.rows(), p->value.cols());
    state_.v.emplace_back(p->value.rows(), p->value.cols());
  }
}

void Adam::step(std::span<ad::Parameter* const> params, double lr, double weight_decay) {
  if (params.size() != state_.m.size()) {
    throw ContractError("adam: " + std::to_string(params.size()) + " parameters for state of " +
                        std::to_string(state_.m.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto* p = params[i];
    if (!p->grad.same_shape(p->value) || !state_.m[i].same_shape(p->value)) {
      throw DimensionError("adam: shape mismatch for " + p->name);
    }
    if (!all_finite(p->grad)) throw NumericError("adam: non-finite gradient in " + p->name);
  }
  ++state_.step;
  const double t = static_cast<double>(state_.step);
  const double c1 = 1.0 - std::pow(kBeta1, t);
  const double c2 = 1.0 - std::pow(kBeta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i]->value.values();
    const auto g = params[i]->grad.values();
    auto m = state_.m[i].values();
    auto v = state_.v[i].values();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * g[j];
      v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      w[j] -= lr * (mhat / (std::sqrt(vhat) + kEpsilon) + weight_decay * w[j]);
    }
  }
}

double clip_global_norm(std::span<ad::Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const auto* p : params) {
    for (double g : p->grad.values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto* p : params) {
      for (double& g : p->grad.values()) g *= factor;
    }
  }
  return norm;
}

void zero_grads(std::span<ad::Parameter* const> params) {
  for (auto* p : params) p->zero_grad();
}

// ---------------------------------------------------------------------------

ad::Var batch_objective(ad::Tape& tape, model::CompactModel& model, const item::Catalog& catalog,
                        std::span<const model::Sample> batch, const TrainConfig& config,
                        Losses* losses) {
  std::vector<std::vector<std::size_t>> histories;
  std::vector<std::size_t> targets;
  std::vector<index::SidCode> target_sids;
  for (const auto& s : batch) {
    histories.push_back(s.history);
    targets.push_back(s.target);
    target_sids.push_back(catalog.sid(s.target));
  }
  auto fwd = model::encode_compact(tape, model, catalog, histories, targets, config.item_mode());
  ad::Var l_aln = item::alignment_loss(fwd.items);
  ad::Var l_rec =
      rec_loss(tape, model.user_ran(), fwd.user_states, target_sids, config.user_mode());
  ad::Var root = config.use_aln ? total_loss(l_rec, l_aln, config.lambda) : l_rec;
  if (losses) {
    losses->rec = l_rec.value()(0, 0);
    losses->aln = l_aln.value()(0, 0);
    losses->total = root.value()(0, 0);
  }
  return root;
}

Losses train_step(model::CompactModel& model, Adam& adam, const item::Catalog& catalog,
                  std::span<const model::Sample> batch, const TrainConfig& config) {
  auto params = model.parameters();
  zero_grads(params);
  Losses losses;
  {
    ad::Tape tape;
    ad::Var root = batch_objective(tape, model, catalog, batch, config, &losses);
    tape.backward(root);
  }
  clip_global_norm(params, config.clip_norm);
  adam.step(params, config.lr, config.weight_decay);
  return losses;
}

Trainer::Trainer(model::CompactModel& model, const item::Catalog& catalog,
                 std::vector<model::Sample> samples, TrainConfig config)
    : model_(model),
      catalog_(catalog),
      samples_(std::move(samples)),
      config_(config),
      rng_(derive_seed(config.seed, 10)) {
  config_.validate();
  if (samples_.empty()) throw EmptyDatasetError("trainer: no training samples");
  auto params = model_.parameters();
  adam_ = Adam(params);
}

EpochMetrics Trainer::run_epoch() {
  std::vector<std::size_t> order(samples_.size());
  std::iota(order.begin(), order.end(), 0);
  rng_.shuffle(std::span(order));
  EpochMetrics out;
  std::vector<model::Sample> batch;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    batch.clear();
    const std::size_t end = std::min(order.size(), start + config_.batch_size);
    for (std::size_t i = start; i < end; ++i) batch.push_back(samples_[order[i]]);
    const auto l = train_step(model_, adam_, catalog_, batch, config_);
    out.rec += l.rec;
    out.aln += l.aln;
    out.total += l.total;
    ++out.steps;
  }
  const double n = static_cast<double>(out.steps);
  out.rec /= n;
  out.aln /= n;
  out.total /= n;
  return out;
}

double flattened_train_step(model::FlattenedModel& model, Adam& adam,
                            const item::Catalog& catalog, std::span<const model::Sample> batch,
                            const TrainConfig& config) {
  auto params = model.parameters();
  zero_grads(params);
  double loss = 0.0;
  {
    ad::Tape tape;
    ad::Var root = model::flattened_loss(tape, model, catalog, batch);
    loss = root.value()(0, 0);
    tape.backward(root);
  }
  clip_global_norm(params, config.clip_norm);
  adam.step(params, config.lr, config.weight_decay);
  return loss;
}

// ---------------------------------------------------------------------------
// checkpoint

Checkpoint make_checkpoint(std::span<ad::Parameter* const> params, const AdamState& optimizer,
                           std::string config_text, std::string rng_state) {
  Checkpoint c;
  for (const auto* p : params) c.params.emplace_back(p->name, p->value);
  c.optimizer = optimizer;
  c.config_text = std::move(config_text);
  c.rng_state = std::move(rng_state);
  return c;
}

void restore_parameters(const Checkpoint& ckpt, std::span<ad::Parameter* const> params) {
  for (auto* p : params) {
    auto it = std::find_if(ckpt.params.begin(), ckpt.params.end(),
                           [&](const auto& entry) { return entry.first == p->name; });
    if (it == ckpt.params.end()) throw RuntimeFailure("checkpoint lacks parameter " + p->name);
    if (!it->second.same_shape(p->value)) {
      throw RuntimeFailure("checkpoint parameter " + p->name + " has shape " +
                           it->second.shape_string() + ", model expects " +
                           p->value.shape_string());
    }
    p->value = it->second;
    p->zero_grad();
  }
}

namespace {

template <class T>
void put_le(std::ostream& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits = std::bit_cast<U>(value);
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <class T>
T get_le(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) {
    throw RuntimeFailure("checkpoint: truncated file");
  }
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(bytes[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

void put_string(std::ostream& out, const std::string& s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get_le<std::uint32_t>(in);
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw RuntimeFailure("checkpoint: truncated string");
  return s;
}

void put_matrix_values(std::ostream& out, const DenseMatrix& m) {
  for (double v : m.values()) put_le<double>(out, v);
}

void get_matrix_values(std::istream& in, DenseMatrix& m) {
  for (double& v : m.values()) v = get_le<double>(in);
}

}  // namespace

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  if (ckpt.optimizer.m.size() != ckpt.params.size() ||
      ckpt.optimizer.v.size() != ckpt.params.size()) {
    throw ContractError("checkpoint: optimizer state does not match parameter count");
  }
  out.write("IRRC", 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [name, value] : ckpt.params) {
    put_string(out, name);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(value.rows()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(value.cols()));
    put_matrix_values(out, value);
  }
  put_le<std::uint64_t>(out, ckpt.optimizer.step);
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    put_matrix_values(out, ckpt.optimizer.m[i]);
    put_matrix_values(out, ckpt.optimizer.v[i]);
  }
  put_string(out, ckpt.config_text);
  put_string(out, ckpt.rng_state);
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "IRRC", 4) != 0) {
    throw RuntimeFailure("checkpoint: bad magic, expected IRRC");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw RuntimeFailure("checkpoint: unsupported version " + std::to_string(version) +
                         " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint c;
  const auto count = get_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = get_string(in);
    const auto rows = get_le<std::uint32_t>(in);
    const auto cols = get_le<std::uint32_t>(in);
    DenseMatrix m(rows, cols);
    get_matrix_values(in, m);
    c.params.emplace_back(std::move(name), std::move(m));
  }
  c.optimizer.step = get_le<std::uint64_t>(in);
  for (const auto& [name, value] : c.params) {
    DenseMatrix m(value.rows(), value.cols());
    DenseMatrix v(value.rows(), value.cols());
    get_matrix_values(in, m);
    get_matrix_values(in, v);
    c.optimizer.m.push_back(std::move(m));
    c.optimizer.v.push_back(std::move(v));
  }
  c.config_text = get_string(in);
  c.rng_state = get_string(in);
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write checkpoint " + path.string());
  write_checkpoint(ckpt, out);
  if (!out) throw RuntimeFailure("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw RuntimeFailure("checkpoint not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot read checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace irr::train
