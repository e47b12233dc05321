#pragma once

// The four simulation sweeps, run as seeded independent repetitions.
//
// Run r uses run_seed = derive_seed(base_seed, "run", r). Everything a run
// draws comes from streams of run_seed, so cells of a sweep share their
// ground truth and target sample (common random numbers) and a run's
// numbers do not depend on which other runs exist or on thread count.

#include "divlab/transfer.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace divlab {

struct ExperimentConfig {
  std::string which = "a";  // a, b, c, d
  Architecture arch;
  std::size_t n_so = 1000;
  std::size_t n_ta = 100;
  std::size_t source_steps = 2000;
  std::size_t target_steps = 2000;
  double noise_sigma = 0.1;
  double learning_rate = 1e-3;
  std::size_t n_eval = 10000;
  std::size_t runs = 20;
  std::uint64_t base_seed = 1;
  std::string output;  // empty: stdout

  std::vector<std::size_t> n_so_grid{100, 1000, 10000};  // a
  std::vector<std::size_t> n_ta_grid{10, 100, 1000};     // a
  std::size_t total_depth = 6;                           // b: K + K_ta
  std::vector<std::size_t> p_grid{1, 2, 4};              // c
  std::size_t total_observations = 4000;                 // c: n_so * p
  std::vector<std::size_t> k_so_grid{1, 2, 3};           // d

  std::size_t threads = 0;  // 0: DIVLAB_THREADS, else hardware concurrency

  TwoPhaseConfig two_phase() const;
};

void validate(const ExperimentConfig& cfg);

// Flat JSON object whose keys mirror the field names above; unknown keys
// are rejected.
void apply_config_json(ExperimentConfig& cfg, const std::string& text);

struct ResultRow {
  std::string experiment;
  std::string param;
  std::string value;
  std::optional<std::size_t> run;  // empty for the aggregate row
  std::uint64_t seed = 0;          // run seed, or the base seed for aggregates
  std::optional<double> mse;       // empty for a failed run
  bool baseline = false;
  double std = 0.0;  // aggregates only
  std::size_t n_runs = 0;
  std::size_t failed_runs = 0;
  bool terminal_activation = false;
};

// One sweep cell: its per-run rows followed by the aggregate.
struct Cell {
  std::vector<ResultRow> runs;
  ResultRow aggregate;
};

std::vector<Cell> run_experiment_a(const ExperimentConfig& cfg);
std::vector<Cell> run_experiment_b(const ExperimentConfig& cfg);
std::vector<Cell> run_experiment_c(const ExperimentConfig& cfg);
std::vector<Cell> run_experiment_d(const ExperimentConfig& cfg);
std::vector<Cell> run_experiment(const ExperimentConfig& cfg);

// experiment,param,value,run,seed,mse,baseline,std,n_runs,failed_runs,terminal_activation
// The mse column is the excess error against the noise-free mean function.
void write_results_csv(const std::vector<Cell>& cells, std::ostream& out);

std::size_t worker_count(std::size_t requested);

}  // namespace divlab
