#include "divlab/experiments.hpp"

#include "divlab/error.hpp"
#include "divlab/rng.hpp"

#include <json.hpp>

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <ostream>
#include <thread>

namespace divlab {

TwoPhaseConfig ExperimentConfig::two_phase() const {
  TwoPhaseConfig tp;
  tp.arch = arch;
  tp.n_so = n_so;
  tp.n_ta = n_ta;
  tp.source_steps = source_steps;
  tp.target_steps = target_steps;
  tp.opt.learning_rate = learning_rate;
  tp.noise_sigma = noise_sigma;
  tp.n_eval = n_eval;
  return tp;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.which != "a" && cfg.which != "b" && cfg.which != "c" && cfg.which != "d")
    throw ContractError("unknown experiment '" + cfg.which + "' (expected a, b, c or d)");
  if (cfg.runs < 1) throw ContractError("runs must be >= 1");
  if (!(cfg.noise_sigma >= 0.0)) throw ContractError("noise_sigma must be >= 0");
  if (!(cfg.learning_rate > 0.0)) throw ContractError("learning_rate must be > 0");
  validate(cfg.two_phase());
  if (cfg.n_so_grid.empty() || cfg.n_ta_grid.empty() || cfg.p_grid.empty() || cfg.k_so_grid.empty())
    throw ContractError("sweep grids must be non-empty");
  for (auto v : cfg.n_so_grid)
    if (v < 1) throw ContractError("n_so_grid entries must be >= 1");
  for (auto v : cfg.n_ta_grid)
    if (v < 1) throw ContractError("n_ta_grid entries must be >= 1");
  for (auto v : cfg.k_so_grid)
    if (v < 1) throw ContractError("k_so_grid entries must be >= 1");
  if (cfg.total_depth < 2) throw ContractError("total_depth must be >= 2");
  for (auto p : cfg.p_grid) {
    if (p < 1) throw ContractError("p_grid entries must be >= 1");
    if (p > cfg.arch.n_u) throw ContractError("p_grid entry " + std::to_string(p) + " exceeds n_u");
    if (cfg.total_observations / p < 1) throw ContractError("total_observations is smaller than p");
  }
}

void apply_config_json(ExperimentConfig& cfg, const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ContractError(std::string("malformed config: ") + e.what());
  }
  if (!j.is_object()) throw ContractError("config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "which") cfg.which = v.get<std::string>();
      else if (key == "d_in") cfg.arch.d_in = v.get<std::size_t>();
      else if (key == "n_u") cfg.arch.n_u = v.get<std::size_t>();
      else if (key == "K") cfg.arch.K = v.get<std::size_t>();
      else if (key == "K_so") cfg.arch.K_so = v.get<std::size_t>();
      else if (key == "K_ta") cfg.arch.K_ta = v.get<std::size_t>();
      else if (key == "p") cfg.arch.p = v.get<std::size_t>();
      else if (key == "T") cfg.arch.T = v.get<std::size_t>();
      else if (key == "terminal_activation") cfg.arch.source_terminal_activation = v.get<bool>();
      else if (key == "n_so") cfg.n_so = v.get<std::size_t>();
      else if (key == "n_ta") cfg.n_ta = v.get<std::size_t>();
      else if (key == "steps") cfg.source_steps = cfg.target_steps = v.get<std::size_t>();
      else if (key == "source_steps") cfg.source_steps = v.get<std::size_t>();
      else if (key == "target_steps") cfg.target_steps = v.get<std::size_t>();
      else if (key == "noise_sigma") cfg.noise_sigma = v.get<double>();
      else if (key == "learning_rate") cfg.learning_rate = v.get<double>();
      else if (key == "n_eval") cfg.n_eval = v.get<std::size_t>();
      else if (key == "runs") cfg.runs = v.get<std::size_t>();
      else if (key == "base_seed" || key == "seed") cfg.base_seed = v.get<std::uint64_t>();
      else if (key == "output") cfg.output = v.get<std::string>();
      else if (key == "n_so_grid") cfg.n_so_grid = v.get<std::vector<std::size_t>>();
      else if (key == "n_ta_grid") cfg.n_ta_grid = v.get<std::vector<std::size_t>>();
      else if (key == "total_depth") cfg.total_depth = v.get<std::size_t>();
      else if (key == "p_grid") cfg.p_grid = v.get<std::vector<std::size_t>>();
      else if (key == "total_observations") cfg.total_observations = v.get<std::size_t>();
      else if (key == "k_so_grid") cfg.k_so_grid = v.get<std::vector<std::size_t>>();
      else if (key == "threads") cfg.threads = v.get<std::size_t>();
      else throw ContractError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("config value has the wrong type: ") + e.what());
  }
}

std::size_t worker_count(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DIVLAB_THREADS")) {
    std::size_t n = 0;
    const char* end = env + std::char_traits<char>::length(env);
    const auto res = std::from_chars(env, end, n);
    if (res.ec == std::errc() && res.ptr == end && n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

// Jobs claim indices from a shared counter; results go to per-index slots
// so completion order never shows up in the output.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& job) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t k = std::min(threads, n);
  if (k <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < k; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::uint64_t run_seed(const ExperimentConfig& cfg, std::size_t r) { return derive_seed(cfg.base_seed, "run", r); }

GroundTruth truth_for(const ExperimentConfig& cfg, const Architecture& arch, std::size_t r) {
  return make_ground_truth(arch, derive_seed(run_seed(cfg, r), "truth"), cfg.noise_sigma);
}

SourceFit fit_sources(const GroundTruth& gt, const TwoPhaseConfig& tp, std::size_t n_so, std::uint64_t rs) {
  const std::uint64_t data_seed = derive_seed(rs, "source-data", n_so);
  std::vector<Dataset> data;
  for (std::size_t t = 0; t < gt.f_sources.size(); ++t)
    data.push_back(sample_dataset(gt, Task::source(t), n_so, derive_seed(data_seed, "task", t)));
  return train_source_phase(data, gt.arch, tp, derive_seed(rs, "init-source"));
}

Dataset target_sample(const GroundTruth& gt, std::size_t n_ta, std::uint64_t rs) {
  return sample_dataset(gt, Task::target(), n_ta, derive_seed(rs, "target-data", n_ta));
}

double transfer_excess(const Mlp& trunk, const Dataset& target, const GroundTruth& gt, const TwoPhaseConfig& tp,
                       std::uint64_t rs) {
  const Mlp head = train_target_phase(trunk, target, tp, derive_seed(rs, "init-target"));
  return estimate_excess_error(head, trunk, gt, Task::target(), tp.n_eval, derive_seed(rs, "eval"));
}

double baseline_excess(const Dataset& target, const GroundTruth& gt, const TwoPhaseConfig& tp, std::uint64_t rs) {
  const Mlp net = train_baseline(target, tp, derive_seed(rs, "init-baseline"));
  return estimate_excess_error(net, Mlp{}, gt, Task::target(), tp.n_eval, derive_seed(rs, "eval"));
}

struct CellSpec {
  std::string param;
  std::string value;
  bool baseline = false;
  bool terminal_activation = false;
};

using Slots = std::vector<std::vector<std::optional<double>>>;  // [cell][run]

std::vector<Cell> assemble(const ExperimentConfig& cfg, const std::string& tag, const std::vector<CellSpec>& specs,
                           const Slots& slots) {
  std::vector<Cell> cells;
  for (std::size_t c = 0; c < specs.size(); ++c) {
    Cell cell;
    ResultRow base;
    base.experiment = tag;
    base.param = specs[c].param;
    base.value = specs[c].value;
    base.baseline = specs[c].baseline;
    base.terminal_activation = specs[c].terminal_activation;
    double sum = 0.0;
    std::vector<double> ok;
    for (std::size_t r = 0; r < cfg.runs; ++r) {
      ResultRow row = base;
      row.run = r;
      row.seed = run_seed(cfg, r);
      row.mse = slots[c][r];
      if (row.mse) {
        ok.push_back(*row.mse);
        sum += *row.mse;
      }
      cell.runs.push_back(std::move(row));
    }
    ResultRow agg = base;
    agg.seed = cfg.base_seed;
    agg.n_runs = ok.size();
    agg.failed_runs = cfg.runs - ok.size();
    if (!ok.empty()) {
      const double mean = sum / static_cast<double>(ok.size());
      agg.mse = mean;
      if (ok.size() > 1) {
        double ss = 0.0;
        for (double v : ok) ss += (v - mean) * (v - mean);
        agg.std = std::sqrt(ss / static_cast<double>(ok.size() - 1));
      }
    }
    cell.aggregate = std::move(agg);
    cells.push_back(std::move(cell));
  }
  return cells;
}

// A numeric failure marks the affected runs as failed; anything else is a
// real error and propagates.
template <typename F>
void record(F&& compute) {
  try {
    compute();
  } catch (const NumericError&) {
  }
}

std::string num(std::size_t v) { return std::to_string(v); }

}  // namespace

std::vector<Cell> run_experiment_a(const ExperimentConfig& cfg) {
  validate(cfg);
  const TwoPhaseConfig tp = cfg.two_phase();
  const std::size_t n_so_count = cfg.n_so_grid.size(), n_ta_count = cfg.n_ta_grid.size();
  std::vector<CellSpec> specs;
  for (auto n_so : cfg.n_so_grid)
    for (auto n_ta : cfg.n_ta_grid) specs.push_back({"n_so:n_ta", num(n_so) + ":" + num(n_ta), false, false});
  for (auto n_ta : cfg.n_ta_grid) specs.push_back({"n_ta", num(n_ta), true, false});
  Slots slots(specs.size(), std::vector<std::optional<double>>(cfg.runs));

  // One job per (run, n_so) trains the trunk once and fits every n_ta head
  // on it; one job per (run, n_ta) trains the baseline.
  const std::size_t transfer_jobs = cfg.runs * n_so_count;
  parallel_for(transfer_jobs + cfg.runs * n_ta_count, worker_count(cfg.threads), [&](std::size_t job) {
    if (job < transfer_jobs) {
      const std::size_t r = job / n_so_count, i = job % n_so_count;
      const std::uint64_t rs = run_seed(cfg, r);
      const GroundTruth gt = truth_for(cfg, cfg.arch, r);
      std::optional<SourceFit> src;
      record([&] { src = fit_sources(gt, tp, cfg.n_so_grid[i], rs); });
      if (!src) return;
      for (std::size_t j = 0; j < n_ta_count; ++j)
        record([&] {
          slots[i * n_ta_count + j][r] = transfer_excess(src->trunk, target_sample(gt, cfg.n_ta_grid[j], rs), gt, tp, rs);
        });
    } else {
      const std::size_t k = job - transfer_jobs;
      const std::size_t r = k / n_ta_count, j = k % n_ta_count;
      const std::uint64_t rs = run_seed(cfg, r);
      const GroundTruth gt = truth_for(cfg, cfg.arch, r);
      record([&] {
        slots[n_so_count * n_ta_count + j][r] = baseline_excess(target_sample(gt, cfg.n_ta_grid[j], rs), gt, tp, rs);
      });
    }
  });
  return assemble(cfg, "a", specs, slots);
}

std::vector<Cell> run_experiment_b(const ExperimentConfig& cfg) {
  validate(cfg);
  const std::size_t n_k = cfg.total_depth - 1;
  std::vector<CellSpec> specs;
  for (std::size_t K = 1; K <= n_k; ++K) specs.push_back({"K", num(K), false, false});
  specs.push_back({"K+K_ta", num(cfg.total_depth), true, false});
  Slots slots(specs.size(), std::vector<std::optional<double>>(cfg.runs));

  auto arch_for = [&](std::size_t K) {
    Architecture a = cfg.arch;
    a.K = K;
    a.K_ta = cfg.total_depth - K;
    a.K_so = 1;
    return a;
  };
  // The composed target only depends on K + K_ta, so one baseline serves
  // every split.
  parallel_for(cfg.runs * (n_k + 1), worker_count(cfg.threads), [&](std::size_t job) {
    const std::size_t r = job / (n_k + 1), c = job % (n_k + 1);
    const std::uint64_t rs = run_seed(cfg, r);
    const Architecture arch = arch_for(c < n_k ? c + 1 : n_k);
    TwoPhaseConfig tp = cfg.two_phase();
    tp.arch = arch;
    const GroundTruth gt = truth_for(cfg, arch, r);
    const Dataset target = target_sample(gt, cfg.n_ta, rs);
    record([&] {
      if (c < n_k) slots[c][r] = transfer_excess(fit_sources(gt, tp, cfg.n_so, rs).trunk, target, gt, tp, rs);
      else slots[c][r] = baseline_excess(target, gt, tp, rs);
    });
  });
  return assemble(cfg, "b", specs, slots);
}

std::vector<Cell> run_experiment_c(const ExperimentConfig& cfg) {
  validate(cfg);
  std::vector<CellSpec> specs;
  for (auto p : cfg.p_grid) specs.push_back({"p", num(p), false, false});
  Slots slots(specs.size(), std::vector<std::optional<double>>(cfg.runs));
  const std::size_t n_p = cfg.p_grid.size();
  parallel_for(cfg.runs * n_p, worker_count(cfg.threads), [&](std::size_t job) {
    const std::size_t r = job / n_p, i = job % n_p;
    const std::uint64_t rs = run_seed(cfg, r);
    Architecture arch = cfg.arch;
    arch.p = cfg.p_grid[i];
    arch.K_so = 1;
    TwoPhaseConfig tp = cfg.two_phase();
    tp.arch = arch;
    const GroundTruth gt = truth_for(cfg, arch, r);
    const std::size_t n_so = cfg.total_observations / arch.p;
    record([&] {
      slots[i][r] = transfer_excess(fit_sources(gt, tp, n_so, rs).trunk, target_sample(gt, cfg.n_ta, rs), gt, tp, rs);
    });
  });
  return assemble(cfg, "c", specs, slots);
}

std::vector<Cell> run_experiment_d(const ExperimentConfig& cfg) {
  validate(cfg);
  std::vector<CellSpec> specs;
  for (auto k : cfg.k_so_grid) specs.push_back({"K_so", num(k), false, true});
  specs.push_back({"K_so", "none", true, false});
  Slots slots(specs.size(), std::vector<std::optional<double>>(cfg.runs));
  const std::size_t n_k = cfg.k_so_grid.size();
  parallel_for(cfg.runs * (n_k + 1), worker_count(cfg.threads), [&](std::size_t job) {
    const std::size_t r = job / (n_k + 1), c = job % (n_k + 1);
    const std::uint64_t rs = run_seed(cfg, r);
    Architecture arch = cfg.arch;
    if (c < n_k) {
      arch.K_so = cfg.k_so_grid[c];
      arch.source_terminal_activation = true;
    }
    TwoPhaseConfig tp = cfg.two_phase();
    tp.arch = arch;
    const GroundTruth gt = truth_for(cfg, arch, r);
    const Dataset target = target_sample(gt, cfg.n_ta, rs);
    record([&] {
      if (c < n_k) slots[c][r] = transfer_excess(fit_sources(gt, tp, cfg.n_so, rs).trunk, target, gt, tp, rs);
      else slots[c][r] = baseline_excess(target, gt, tp, rs);
    });
  });
  return assemble(cfg, "d", specs, slots);
}

std::vector<Cell> run_experiment(const ExperimentConfig& cfg) {
  if (cfg.which == "a") return run_experiment_a(cfg);
  if (cfg.which == "b") return run_experiment_b(cfg);
  if (cfg.which == "c") return run_experiment_c(cfg);
  if (cfg.which == "d") return run_experiment_d(cfg);
  throw ContractError("unknown experiment '" + cfg.which + "'");
}

namespace {

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_row(const ResultRow& row, std::ostream& out) {
  out << row.experiment << ',' << row.param << ',' << row.value << ',';
  out << (row.run ? std::to_string(*row.run) : std::string("AGG")) << ',' << row.seed << ',';
  out << (row.mse ? fmt(*row.mse) : std::string("failed")) << ',' << (row.baseline ? 1 : 0) << ',';
  if (row.run) out << ",,";
  else out << fmt(row.std) << ',' << row.n_runs << ',' << row.failed_runs;
  out << ',' << (row.terminal_activation ? 1 : 0) << '\n';
}

}  // namespace

void write_results_csv(const std::vector<Cell>& cells, std::ostream& out) {
  out << "experiment,param,value,run,seed,mse,baseline,std,n_runs,failed_runs,terminal_activation\n";
  for (const Cell& c : cells) {
    for (const ResultRow& r : c.runs) write_row(r, out);
    write_row(c.aggregate, out);
  }
}

}  // namespace divlab
