#pragma once

// Two-phase transfer: fit a shared trunk plus source heads on the source
// data, freeze the trunk, fit a target head on the target data. The
// baseline trains the full trunk+head network on the target data alone.

#include "divlab/netcore.hpp"
#include "divlab/synth.hpp"

#include <cstdint>
#include <vector>

namespace divlab {

struct TwoPhaseConfig {
  Architecture arch;
  std::size_t n_so = 1000;
  std::size_t n_ta = 100;
  std::size_t source_steps = 2000;
  std::size_t target_steps = 2000;
  OptSettings opt;
  bool freeze_representation = true;
  double noise_sigma = 0.1;
  std::size_t n_eval = 10000;
};

void validate(const TwoPhaseConfig& cfg);

// Full-batch training of every parameter of `net`; returns the loss before
// each step. Throws NumericError carrying the step index on NaN/Inf.
std::vector<double> fit(Mlp& net, const Mat& inputs, const Mat& targets, std::size_t steps,
                        const OptSettings& opt);

// Trainable nets start from He-normal weights (std sqrt(2/fan_in) before a
// relu, sqrt(1/fan_in) before an identity output) and zero biases.
Mlp init_trunk(const Architecture& arch, std::uint64_t seed);
Mlp init_source_head(const Architecture& arch, std::uint64_t seed);
Mlp init_target_head(const Architecture& arch, std::size_t depth, std::uint64_t seed);

struct SourceFit {
  Mlp trunk;
  std::vector<Mlp> heads;
  std::vector<double> loss_trace;
};

// Adam on (1 / sum n_t) sum_t sum_i ||f_t ∘ h(x_ti) - y_ti||^2.
SourceFit train_source_phase(const std::vector<Dataset>& sources, const Architecture& arch,
                             const TwoPhaseConfig& cfg, std::uint64_t init_seed);
// Samples n_so points per source task from `gt` under `seed`.
SourceFit train_source_phase(const GroundTruth& gt, const TwoPhaseConfig& cfg, std::uint64_t seed);

// Trains only a fresh K_ta-layer head on trunk features; `trunk` is read
// through a const reference and never modified.
Mlp train_target_phase(const Mlp& trunk, const Dataset& target, const TwoPhaseConfig& cfg,
                       std::uint64_t init_seed);
Mlp train_target_phase(const Mlp& trunk, const GroundTruth& gt, const TwoPhaseConfig& cfg,
                       std::uint64_t seed);

// Trunk + target head trained jointly from scratch on the target data.
Mlp train_baseline(const Dataset& target, const TwoPhaseConfig& cfg, std::uint64_t init_seed);
// Excess error of the baseline predictor.
double run_baseline(const GroundTruth& gt, const TwoPhaseConfig& cfg, std::uint64_t seed);

// Monte-Carlo E_X ||f∘h(X) - f_true∘h_true(X)||^2 on fresh N(0, I) inputs.
double estimate_excess_error(const Mlp& f, const Mlp& h, const Mlp& f_true, const Mlp& h_true,
                             std::size_t n_eval, std::uint64_t seed);
double estimate_excess_error(const Mlp& f, const Mlp& h, const GroundTruth& gt, Task task,
                             std::size_t n_eval, std::uint64_t seed);

struct TransferReport {
  std::vector<double> source_train_loss;
  double target_mse = 0.0;     // held-out noisy MSE of the transferred predictor
  double baseline_mse = 0.0;   // held-out noisy MSE of the baseline
  double excess_target = 0.0;  // against the noise-free mean function
  double excess_baseline = 0.0;
  double excess_source = 0.0;  // averaged over source tasks
  std::uint64_t seed = 0;
  TwoPhaseConfig config;
};

// One complete run: ground truth, both phases, baseline, evaluation.
TransferReport run_transfer(const TwoPhaseConfig& cfg, std::uint64_t seed);

}  // namespace divlab
