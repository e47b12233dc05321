#include "divlab/cli.hpp"
#include "divlab/error.hpp"
#include "divlab/experiments.hpp"
#include "divlab/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>

using namespace divlab;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "divlab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Runs the installed binary and returns its stdout.
std::string run_binary(const std::string& args, int& status) {
  const std::string cmd = std::string(DIVLAB_BIN) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string text;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) text.append(buf, n);
  status = WEXITSTATUS(pclose(pipe));
  return text;
}

ExperimentConfig tiny(const std::string& which) {
  ExperimentConfig c;
  c.which = which;
  c.runs = 3;
  c.source_steps = 30;
  c.target_steps = 30;
  c.n_so = 60;
  c.n_ta = 10;
  c.n_eval = 300;
  c.n_so_grid = {40, 80};
  c.n_ta_grid = {5, 10};
  c.total_observations = 120;
  c.threads = 1;
  return c;
}

std::filesystem::path temp_file(const std::string& name, const std::string& text) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(Config, JsonOverridesFields) {
  ExperimentConfig c;
  apply_config_json(c, R"({"runs": 7, "n_u": 6, "n_so_grid": [5, 6], "noise_sigma": 0.3, "base_seed": 11})");
  EXPECT_EQ(c.runs, 7u);
  EXPECT_EQ(c.arch.n_u, 6u);
  EXPECT_EQ(c.n_so_grid, (std::vector<std::size_t>{5, 6}));
  EXPECT_EQ(c.noise_sigma, 0.3);
  EXPECT_EQ(c.base_seed, 11u);
}

TEST(Config, RejectsUnknownKeysAndBadJson) {
  ExperimentConfig c;
  EXPECT_THROW(apply_config_json(c, R"({"rnus": 3})"), ContractError);
  EXPECT_THROW(apply_config_json(c, R"({"runs": "many"})"), ContractError);
  EXPECT_THROW(apply_config_json(c, "{runs"), ContractError);
  EXPECT_THROW(apply_config_json(c, "[1, 2]"), ContractError);
}

TEST(Config, ValidationCapsP) {
  ExperimentConfig c;
  c.p_grid = {1, 8};
  EXPECT_THROW(validate(c), ContractError);
  c = ExperimentConfig{};
  c.which = "e";
  EXPECT_THROW(validate(c), ContractError);
}

TEST(Experiments, CellCounts) {
  const auto a = run_experiment(tiny("a"));
  ASSERT_EQ(a.size(), 6u);
  std::size_t baseline = 0;
  for (const auto& c : a) baseline += c.aggregate.baseline;
  EXPECT_EQ(baseline, 2u);
  const auto b = run_experiment(tiny("b"));
  EXPECT_EQ(b.size(), 6u);
  EXPECT_TRUE(b.back().aggregate.baseline);
  EXPECT_EQ(run_experiment(tiny("c")).size(), 3u);
  const auto d = run_experiment(tiny("d"));
  ASSERT_EQ(d.size(), 4u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(d[i].aggregate.terminal_activation);
  EXPECT_TRUE(d[3].aggregate.baseline);
}

TEST(Experiments, AggregatesRecomputeFromRuns) {
  for (const char* which : {"a", "c", "d"}) {
    for (const auto& cell : run_experiment(tiny(which))) {
      std::vector<double> v;
      for (const auto& r : cell.runs)
        if (r.mse) v.push_back(*r.mse);
      ASSERT_EQ(v.size() + cell.aggregate.failed_runs, cell.runs.size());
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
      ASSERT_TRUE(cell.aggregate.mse.has_value());
      EXPECT_NEAR(*cell.aggregate.mse, mean, 1e-12);
      EXPECT_NEAR(cell.aggregate.std, sd, 1e-12);
      EXPECT_EQ(cell.aggregate.n_runs, v.size());
    }
  }
}

TEST(Experiments, CsvRoundTripsAggregates) {
  std::ostringstream os;
  write_results_csv(run_experiment(tiny("d")), os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "experiment,param,value,run,seed,mse,baseline,std,n_runs,failed_runs,terminal_activation");
  std::map<std::string, std::vector<double>> per_cell;
  std::map<std::string, std::pair<double, double>> agg;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    ASSERT_EQ(f.size(), 11u) << line;
    const std::string key = f[1] + "=" + f[2] + (f[6] == "1" ? "b" : "");
    if (f[3] == "AGG") agg[key] = {std::stod(f[5]), std::stod(f[7])};
    else per_cell[key].push_back(std::stod(f[5]));
  }
  ASSERT_EQ(agg.size(), 4u);
  for (const auto& [key, v] : per_cell) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(agg[key].first, mean, 1e-12) << key;
    EXPECT_NEAR(agg[key].second, std::sqrt(ss / static_cast<double>(v.size() - 1)), 1e-12) << key;
  }
}

TEST(Experiments, RunIsolation) {
  ExperimentConfig three = tiny("c");
  ExperimentConfig two = three;
  two.runs = 2;
  const auto a = run_experiment(three);
  const auto b = run_experiment(two);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t c = 0; c < a.size(); ++c)
    for (std::size_t r = 0; r < 2; ++r) {
      EXPECT_EQ(a[c].runs[r].mse, b[c].runs[r].mse);
      EXPECT_EQ(a[c].runs[r].seed, derive_seed(three.base_seed, "run", r));
    }
}

TEST(Experiments, ThreadCountDoesNotChangeOutput) {
  ExperimentConfig one = tiny("a");
  ExperimentConfig many = one;
  many.threads = 3;
  std::ostringstream x, y;
  write_results_csv(run_experiment(one), x);
  write_results_csv(run_experiment(many), y);
  EXPECT_EQ(x.str(), y.str());
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({"exp", "c", "--bogus"}).code, 64);
  EXPECT_EQ(cli({}).code, 64);
  EXPECT_EQ(cli({"exp", "z"}).code, 64);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST(Cli, MissingInstanceNamesPath) {
  const auto r = cli({"diversity", "/nonexistent/inst.json"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/nonexistent/inst.json"), std::string::npos);
}

TEST(Cli, BadConfigIsContractError) {
  const auto p = temp_file("divlab_bad_config.json", R"({"unknown_key": 1})");
  EXPECT_EQ(cli({"--config", p.string(), "exp", "c"}).code, 2);
}

TEST(Cli, EluderBudgetExitCode) {
  const auto p = temp_file("divlab_class.json",
                           R"({"domain": ["a", "b"], "values": [[0, 0], [0, 1], [1, 0], [1, 1]]})");
  const auto ok = cli({"eluder", p.string(), "--eps", "0.5"});
  EXPECT_EQ(ok.code, 0);
  EXPECT_NE(ok.out.find("\"dim\": 2"), std::string::npos);
  EXPECT_EQ(cli({"eluder", p.string(), "--eps", "0.5", "--node-cap", "1"}).code, 4);
}

TEST(Cli, DiversityOfSwapInstance) {
  const auto p = temp_file("divlab_swap.json", R"({"weights": [0.5, 0.5], "features": [[0], [1]],
      "representations": [[0, 1], [1, 0]], "source_functions": [[0, 1]], "target_functions": [[0, 1]],
      "sources": [0], "target_true": 0, "true_rep": 0})");
  const auto r = cli({"diversity", p.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"nu_hat\": 1.0"), std::string::npos) << r.out;
}

TEST(Cli, HardnessCanonical) {
  const auto r = cli({"hardness", "relu", "--d", "3", "--eps", "0.5", "--sources", "e1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"target_excess\": 0.01171875"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("\"source_excess\": 0.0"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("\"ratio\": \"inf\""), std::string::npos) << r.out;
  EXPECT_EQ(cli({"hardness", "relu", "--d", "3", "--eps", "0.5", "--sources", "e1,-e1,e2,-e2,e3"}).code, 2);
}

TEST(Cli, BoundSpotValue) {
  const auto r = cli({"bound", "dnn", "--K", "2", "--d-out", "1", "--n", "16", "--m-alpha", "1", "--m-k", "1,1",
                      "--d-z", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::stod(r.out), 1.0);
}

TEST(Cli, ExperimentCByteIdenticalAcrossProcesses) {
  int s1 = -1, s2 = -1;
  const std::string a = run_binary("exp c --runs 2 --seed 7", s1);
  const std::string b = run_binary("exp c --runs 2 --seed 7", s2);
  EXPECT_EQ(s1, 0);
  EXPECT_EQ(s2, 0);
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
}
