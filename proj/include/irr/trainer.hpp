// Copyright 2026 The irr Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Joint objective L = L_rec + lambda * L_aln, AdamW updates, ablation
// switches and the binary checkpoint container.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "irr/model.hpp"

namespace irr::train {

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  double lambda = 0.1;
  std::uint64_t seed = 42;
  /// Global-norm clip; 0 disables.
  double clip_norm = 5.0;
  // ablations: each false value removes one documented path
  bool user_side_tf = true;    // false: user side threads soft contexts
  bool use_aln = true;         // false: L_aln reported, not optimized
  bool redistribution = true;  // false: item side uses hard SID lookups
  bool shared_ran = true;      // false: separate user-side RAN

  void validate() const;
  ran::RanMode item_mode() const {
    return redistribution ? ran::RanMode::kRedistribution : ran::RanMode::kTeacherForcing;
  }
  ran::RanMode user_mode() const {
    return user_side_tf ? ran::RanMode::kTeacherForcing : ran::RanMode::kRedistribution;
  }
};

/// L_rec over a batch: RAN guided by h_u, scored against the target SIDs.
ad::Var rec_loss(ad::Tape& tape, ran::Ran& ran, ad::Var user_states,
                 std::span<const index::SidCode> targets,
                 ran::RanMode mode = ran::RanMode::kTeacherForcing);

double total_loss(double l_rec, double l_aln, double lambda);
ad::Var total_loss(ad::Var l_rec, ad::Var l_aln, double lambda);

struct AdamState {
  std::uint64_t step = 0;
  std::vector<DenseMatrix> m, v;
};

/// Adam (0.9, 0.999, 1e-8), bias-corrected, decoupled weight decay.
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  Adam() = default;
  explicit Adam(std::span<ad::Parameter* const> params);

  /// Throws NumericError naming the parameter before touching anything if a
  /// gradient is non-finite.
  void step(std::span<ad::Parameter* const> params, double lr, double weight_decay);

  AdamState& state() noexcept { return state_; }
  const AdamState& state() const noexcept { return state_; }

 private:
  AdamState state_;
};

/// Scales all gradients so their global L2 norm is at most `max_norm`
/// (no-op when max_norm <= 0). Returns the norm before clipping.
double clip_global_norm(std::span<ad::Parameter* const> params, double max_norm);

void zero_grads(std::span<ad::Parameter* const> params);

struct Losses {
  double rec = 0.0;
  double aln = 0.0;
  double total = 0.0;
};

/// Builds the full objective for one batch on `tape` and returns the root
/// (L_rec + lambda*L_aln, or L_rec alone when use_aln is off).
ad::Var batch_objective(ad::Tape& tape, model::CompactModel& model, const item::Catalog& catalog,
                        std::span<const model::Sample> batch, const TrainConfig& config,
                        Losses* losses = nullptr);

/// Forward, backward, clip and one Adam step.
Losses train_step(model::CompactModel& model, Adam& adam, const item::Catalog& catalog,
                  std::span<const model::Sample> batch, const TrainConfig& config);

struct EpochMetrics {
  double rec = 0.0;
  double aln = 0.0;
  double total = 0.0;
  std::size_t steps = 0;
};

class Trainer {
 public:
  Trainer(model::CompactModel& model, const item::Catalog& catalog,
          std::vector<model::Sample> samples, TrainConfig config);

  /// One pass over the samples in a freshly shuffled order; means over batches.
  EpochMetrics run_epoch();

  Adam& adam() noexcept { return adam_; }
  Rng& rng() noexcept { return rng_; }
  const TrainConfig& config() const noexcept { return config_; }

 private:
  model::CompactModel& model_;
  const item::Catalog& catalog_;
  std::vector<model::Sample> samples_;
  TrainConfig config_;
  Adam adam_;
  Rng rng_;
};

/// Flattened baseline: next-token cross-entropy step.
double flattened_train_step(model::FlattenedModel& model, Adam& adam,
                            const item::Catalog& catalog, std::span<const model::Sample> batch,
                            const TrainConfig& config);

// ---------------------------------------------------------------------------
// checkpoint: "IRRC", u32 version, u32 count, per parameter {u32 name length,
// name, u32 rows, u32 cols, f64 values}, u64 optimizer step, m and v values
// per parameter, u32-length config text, u32-length RNG state; little-endian.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::vector<std::pair<std::string, DenseMatrix>> params;
  AdamState optimizer;
  std::string config_text;
  std::string rng_state;
};

Checkpoint make_checkpoint(std::span<ad::Parameter* const> params, const AdamState& optimizer,
                           std::string config_text, std::string rng_state);
/// Copies values by name; missing or mis-shaped parameters throw RuntimeFailure.
void restore_parameters(const Checkpoint& ckpt, std::span<ad::Parameter* const> params);

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out);
/// Throws RuntimeFailure on bad magic, unsupported version or truncation.
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace irr::train
