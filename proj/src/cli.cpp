#include "divlab/cli.hpp"

#include "divlab/complexity.hpp"
#include "divlab/diversity.hpp"
#include "divlab/eluder.hpp"
#include "divlab/error.hpp"
#include "divlab/experiments.hpp"
#include "divlab/hardness.hpp"
#include "divlab/instance_io.hpp"
#include "divlab/transfer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>

namespace divlab {

namespace {

using nlohmann::json;

constexpr int kExitContract = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitBudget = 4;
constexpr int kExitUsage = 64;

json extended(const ExtendedReal& r) {
  if (r.infinite) return "inf";
  return r.value;
}

std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// "e2" -> (index 1, +1), "-e3" -> (index 2, -1)
std::pair<std::size_t, double> parse_axis(const std::string& token) {
  std::string t = token;
  double sign = 1.0;
  if (!t.empty() && (t[0] == '-' || t[0] == '+')) {
    sign = t[0] == '-' ? -1.0 : 1.0;
    t.erase(0, 1);
  }
  std::size_t k = 0;
  if (t.size() < 2 || t[0] != 'e' ||
      std::from_chars(t.data() + 1, t.data() + t.size(), k).ptr != t.data() + t.size() || k < 1)
    throw ContractError("cannot parse axis '" + token + "' (expected e1, -e2, ...)");
  return {k - 1, sign};
}

Vec axis_vector(const std::string& token, std::size_t d) {
  const auto [i, sign] = parse_axis(token);
  if (i >= d) throw ContractError("axis '" + token + "' exceeds dimension " + std::to_string(d));
  Vec v = Vec::Zero(static_cast<Eigen::Index>(d));
  v(static_cast<Eigen::Index>(i)) = sign;
  return v;
}

// Axes packing order is +e1..+ed, -e1..-ed.
std::size_t axis_index(const std::string& token, std::size_t d) {
  const auto [i, sign] = parse_axis(token);
  if (i >= d) throw ContractError("axis '" + token + "' exceeds dimension " + std::to_string(d));
  return sign > 0 ? i : d + i;
}

std::vector<double> parse_numbers(const std::string& text, char sep) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    const auto b = item.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t\r");
    double v = 0.0;
    const char* first = item.data() + b;
    const char* last = item.data() + e + 1;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) throw ContractError("cannot parse number '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<Vec> parse_points(const std::string& text) {
  std::vector<Vec> pts;
  std::stringstream ss(text);
  std::string row;
  while (std::getline(ss, row, ';')) {
    const auto nums = parse_numbers(row, ',');
    if (nums.empty()) continue;
    pts.push_back(Eigen::Map<const Vec>(nums.data(), static_cast<Eigen::Index>(nums.size())));
  }
  return pts;
}

// Numeric CSV rows; a first line that does not parse is taken as a header.
std::vector<Vec> load_points_csv(const std::string& path) {
  std::stringstream ss(read_text_file(path));
  std::vector<Vec> pts;
  std::string line;
  bool first = true;
  while (std::getline(ss, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto nums = parse_numbers(line, ',');
      pts.push_back(Eigen::Map<const Vec>(nums.data(), static_cast<Eigen::Index>(nums.size())));
    } catch (const ContractError&) {
      if (!first) throw ContractError(path + ": cannot parse row '" + line + "'");
    }
    first = false;
  }
  return pts;
}

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(out_path, std::ios::binary);
  if (!f) throw ContractError("cannot write '" + out_path + "'");
  f << text;
}

struct Globals {
  std::uint64_t seed = 1;
  std::size_t runs = 20;
  std::string out;
  std::string config;
  std::size_t threads = 0;
};

json certificate_json(const DiversityCertificate& c) {
  json j;
  j["nu_hat"] = extended(c.nu_hat);
  j["mu"] = c.mu;
  j["worst_h"] = c.worst_h;
  if (c.worst_target) j["worst_target"] = *c.worst_target;
  j["unbounded"] = c.unbounded;
  json per = json::array();
  for (const auto& r : c.per_h_ratio) per.push_back(extended(r));
  j["per_h_ratio"] = std::move(per);
  return j;
}

json eluder_json(const EluderCertificate& c, const FiniteClass& F) {
  json j;
  j["status"] = c.status == SearchStatus::ok ? "ok" : "budget_exceeded";
  j["dim"] = c.dim;
  json w = json::array();
  for (std::size_t x : c.witness) w.push_back(F.domain[x]);
  j["witness"] = std::move(w);
  j["epsilon"] = c.epsilon;
  j["epsilon_used"] = c.epsilon_used;
  j["nodes"] = c.nodes;
  return j;
}

json hard_json(const HardInstance& inst) {
  json j;
  j["family"] = inst.family == HardFamily::relu ? "relu" : "general";
  if (inst.activation) {
    j["activation"] = inst.activation->name;
    j["M"] = inst.M;
  }
  j["d"] = inst.u.size();
  j["eps"] = inst.eps;
  j["packing_size"] = inst.packing.vectors.size();
  j["support_size"] = inst.support.size();
  j["source_excess"] = inst.source_excess;
  j["target_excess"] = inst.target_excess;
  j["ratio"] = extended(inst.ratio);
  j["lower_bound"] = inst.lower_bound;
  j["bound_holds"] = inst.bound_holds;
  return j;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Numerical laboratory for multi-task representation diversity"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Base seed");
  app.add_option("--runs", g.runs, "Independent runs per sweep cell")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Write output here instead of stdout");
  app.add_option("--config", g.config, "Flat JSON experiment config; flags override it");
  app.add_option("--threads", g.threads, "Worker threads (default DIVLAB_THREADS or all cores)");

  // exp ---------------------------------------------------------------
  auto* exp = app.add_subcommand("exp", "Run one of the simulation sweeps and print CSV");
  std::string which;
  exp->add_option("which", which, "a, b, c or d")->required()->check(CLI::IsMember({"a", "b", "c", "d"}));
  std::size_t o_n_u = 0, o_p = 0, o_K = 0, o_K_so = 0, o_K_ta = 0, o_n_so = 0, o_n_ta = 0, o_steps = 0,
              o_n_eval = 0;
  double o_sigma = 0.0;
  auto* f_n_u = exp->add_option("--n-u", o_n_u, "Hidden width");
  auto* f_p = exp->add_option("--p", o_p, "Source output dimension");
  auto* f_K = exp->add_option("--K", o_K, "Shared depth");
  auto* f_K_so = exp->add_option("--K-so", o_K_so, "Source prediction depth");
  auto* f_K_ta = exp->add_option("--K-ta", o_K_ta, "Target prediction depth");
  auto* f_n_so = exp->add_option("--n-so", o_n_so, "Source sample size");
  auto* f_n_ta = exp->add_option("--n-ta", o_n_ta, "Target sample size");
  auto* f_steps = exp->add_option("--steps", o_steps, "Training steps per phase");
  auto* f_sigma = exp->add_option("--noise-sigma", o_sigma, "Label noise standard deviation");
  auto* f_n_eval = exp->add_option("--n-eval", o_n_eval, "Evaluation sample size");
  std::vector<std::size_t> o_n_so_grid, o_n_ta_grid;
  auto* f_n_so_grid = exp->add_option("--n-so-grid", o_n_so_grid, "Experiment a: n_so values")->delimiter(',');
  auto* f_n_ta_grid = exp->add_option("--n-ta-grid", o_n_ta_grid, "Experiment a: n_ta values")->delimiter(',');

  // transfer ------------------------------------------------------------
  auto* tr = app.add_subcommand("transfer", "One two-phase run against its baseline, as JSON");
  std::size_t t_n_so = 1000, t_n_ta = 100, t_steps = 2000;
  tr->add_option("--n-so", t_n_so);
  tr->add_option("--n-ta", t_n_ta);
  tr->add_option("--steps", t_steps);

  // diversity -------------------------------------------------------------
  auto* div = app.add_subcommand("diversity", "Exact transfer ratio of a finite instance");
  std::string instance_path;
  double mu = 0.0, nu_cap = 1e6;
  bool all_targets = false, witness = false;
  div->add_option("instance", instance_path, "Instance JSON")->required();
  div->add_option("--mu", mu, "mu >= 0");
  div->add_option("--nu-cap", nu_cap, "Largest finite nu reported");
  div->add_flag("--all-targets", all_targets, "Take the sup over every target truth as well");
  div->add_flag("--witness", witness, "Also report a negative-transfer witness");

  // eluder ----------------------------------------------------------------
  auto* elu = app.add_subcommand("eluder", "Eluder dimensions of a finite class");
  std::string class_path;
  double eps = 0.0;
  std::size_t node_cap = 1000000;
  bool dual = false;
  elu->add_option("class", class_path, "Class JSON")->required();
  elu->add_option("--eps", eps, "eps >= 0")->required();
  elu->add_option("--node-cap", node_cap, "Search node budget");
  elu->add_flag("--dual", dual, "Work on the dual class");

  // hardness ----------------------------------------------------------------
  auto* hard = app.add_subcommand("hardness", "Build and evaluate a lower-bound construction");
  hard->require_subcommand(1);
  std::size_t h_d = 3, h_dirs = 10000;
  double h_eps = 0.5;
  std::vector<std::string> h_sources{"e1"};
  std::string h_target;
  bool h_homog = false, h_dump = false;
  auto* relu = hard->add_subcommand("relu", "Thresholded ReLU family");
  relu->add_option("--d", h_d, "Dimension");
  relu->add_option("--eps", h_eps, "Packing separation in (0, 1]");
  relu->add_option("--sources", h_sources, "Source parameters as axes, e.g. e1,-e2")->delimiter(',');
  relu->add_option("--target", h_target, "Target point u as an axis (default: first vanishing point)");
  relu->add_option("--directions", h_dirs, "Grid directions for the infimum");
  relu->add_flag("--homogenize", h_homog, "Lift to d+1 dimensions with a constant offset coordinate");
  relu->add_flag("--instance", h_dump, "Print the construction as a finite instance JSON");
  auto* gen = hard->add_subcommand("general", "General activation family (eps = 1/2)");
  std::string g_act = "sigmoid";
  double g_x1 = 4.0, g_x2 = -4.0;
  std::optional<double> g_M;
  gen->add_option("--activation", g_act, "relu, sigmoid, softplus or tanh");
  gen->add_option("--x1", g_x1);
  gen->add_option("--x2", g_x2);
  gen->add_option("--M", g_M, "Activation margin (default: measured)");
  gen->add_option("--d", h_d, "Dimension");
  gen->add_option("--sources", h_sources, "Source parameters as axes")->delimiter(',');
  gen->add_option("--target", h_target, "Target point u as an axis");
  gen->add_option("--directions", h_dirs, "Grid directions for the infimum");
  gen->add_flag("--instance", h_dump, "Print the construction as a finite instance JSON");

  // complexity --------------------------------------------------------------
  auto* cx = app.add_subcommand("complexity", "Monte-Carlo Gaussian or Rademacher complexity");
  std::string kind;
  std::string cls = "linear", points, data_path, act_name = "relu";
  double radius = 1.0, m_alpha = 1.0, d_z = 0.0;
  std::vector<double> m_k;
  std::vector<std::size_t> widths;
  std::size_t n_mc = 1000, restarts = 8, ascent_steps = 200;
  cx->add_option("kind", kind, "gaussian or rademacher")->required()->check(CLI::IsMember({"gaussian", "rademacher"}));
  cx->add_option("--class", cls, "linear or net")->check(CLI::IsMember({"linear", "net"}));
  cx->add_option("--radius", radius, "Linear ball radius");
  cx->add_option("--points", points, "Data points: '1,0;0,1'");
  cx->add_option("--data", data_path, "Data points as numeric CSV rows");
  cx->add_option("--widths", widths, "Net widths, input first")->delimiter(',');
  cx->add_option("--activation", act_name, "Net activation");
  cx->add_option("--m-alpha", m_alpha, "Head norm budget");
  cx->add_option("--m-k", m_k, "Per-layer norm budgets")->delimiter(',');
  cx->add_option("--d-z", d_z, "Representation bound");
  cx->add_option("--n-mc", n_mc, "Monte-Carlo draws");
  cx->add_option("--restarts", restarts, "Ascent restarts (net class)");
  cx->add_option("--ascent-steps", ascent_steps, "Ascent steps (net class)");

  // bound -------------------------------------------------------------------
  auto* bd = app.add_subcommand("bound", "Evaluate a closed-form bound");
  std::string bound_kind;
  double b_dx = 0, b_lf = 0, b_gh = 0, b_gf = 0, b_g = 0, b_delta = 0.05, b_nu = 0, b_mu = 0, b_eso = 0;
  double b_n = 1;
  std::size_t b_K = 1, b_dout = 1, b_T = 1;
  bd->add_option("kind", bound_kind, "dnn, chain, deviation or target")
      ->required()
      ->check(CLI::IsMember({"dnn", "chain", "deviation", "target"}));
  bd->add_option("--K", b_K);
  bd->add_option("--d-out", b_dout);
  bd->add_option("--n", b_n);
  bd->add_option("--T", b_T);
  bd->add_option("--m-alpha", m_alpha);
  bd->add_option("--m-k", m_k)->delimiter(',');
  bd->add_option("--d-z", d_z);
  bd->add_option("--d-x", b_dx);
  bd->add_option("--l-f", b_lf);
  bd->add_option("--g-h", b_gh);
  bd->add_option("--g-f-max", b_gf);
  bd->add_option("--g", b_g);
  bd->add_option("--delta", b_delta);
  bd->add_option("--nu", b_nu);
  bd->add_option("--mu", b_mu);
  bd->add_option("--e-so", b_eso);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (exp->parsed()) {
      ExperimentConfig cfg;
      if (!g.config.empty()) apply_config_json(cfg, read_text_file(g.config));
      cfg.which = which;
      if (app.get_option("--seed")->count()) cfg.base_seed = g.seed;
      if (app.get_option("--runs")->count()) cfg.runs = g.runs;
      if (app.get_option("--out")->count()) cfg.output = g.out;
      if (app.get_option("--threads")->count()) cfg.threads = g.threads;
      if (f_n_u->count()) cfg.arch.n_u = o_n_u;
      if (f_p->count()) cfg.arch.p = o_p;
      if (f_K->count()) cfg.arch.K = o_K;
      if (f_K_so->count()) cfg.arch.K_so = o_K_so;
      if (f_K_ta->count()) cfg.arch.K_ta = o_K_ta;
      if (f_n_so->count()) cfg.n_so = o_n_so;
      if (f_n_ta->count()) cfg.n_ta = o_n_ta;
      if (f_steps->count()) cfg.source_steps = cfg.target_steps = o_steps;
      if (f_sigma->count()) cfg.noise_sigma = o_sigma;
      if (f_n_eval->count()) cfg.n_eval = o_n_eval;
      if (f_n_so_grid->count()) cfg.n_so_grid = o_n_so_grid;
      if (f_n_ta_grid->count()) cfg.n_ta_grid = o_n_ta_grid;
      std::ostringstream csv;
      write_results_csv(run_experiment(cfg), csv);
      emit(csv.str(), cfg.output, out);
      return 0;
    }

    if (tr->parsed()) {
      TwoPhaseConfig cfg;
      cfg.n_so = t_n_so;
      cfg.n_ta = t_n_ta;
      cfg.source_steps = cfg.target_steps = t_steps;
      const TransferReport rep = run_transfer(cfg, g.seed);
      json j;
      j["seed"] = rep.seed;
      j["target_mse"] = rep.target_mse;
      j["baseline_mse"] = rep.baseline_mse;
      j["excess_target"] = rep.excess_target;
      j["excess_baseline"] = rep.excess_baseline;
      j["excess_source"] = rep.excess_source;
      j["final_source_loss"] = rep.source_train_loss.empty() ? 0.0 : rep.source_train_loss.back();
      emit(j.dump(2) + "\n", g.out, out);
      return 0;
    }

    if (div->parsed()) {
      const FiniteInstance inst = load_instance(instance_path);
      json j = certificate_json(all_targets ? diversity_ratio(inst, mu, nu_cap) : transfer_ratio(inst, mu, nu_cap));
      if (witness) {
        const auto w = negative_transfer_witness(inst);
        j["negative_transfer_witness"] = w ? json(*w) : json(nullptr);
      }
      emit(j.dump(2) + "\n", g.out, out);
      return 0;
    }

    if (elu->parsed()) {
      FiniteClass F = load_class(class_path);
      if (dual) F = dual_class(F);
      const SearchOptions opts{node_cap};
      const EluderCertificate longest = eluder_dimension(F, eps, opts);
      const EluderCertificate cover = shortest_cover_dimension(F, eps, opts);
      json j;
      j["longest"] = eluder_json(longest, F);
      j["shortest_cover"] = eluder_json(cover, F);
      emit(j.dump(2) + "\n", g.out, out);
      const bool over = longest.status != SearchStatus::ok || cover.status != SearchStatus::ok;
      if (over) err << "error: search node cap " << node_cap << " reached\n";
      return over ? kExitBudget : 0;
    }

    if (hard->parsed()) {
      HardnessEvalOptions opts;
      opts.directions = h_dirs;
      HardInstance inst;
      if (relu->parsed()) {
        std::vector<Vec> sources;
        for (const auto& s : h_sources) sources.push_back(axis_vector(s, h_d));
        std::optional<std::size_t> target;
        if (!h_target.empty()) target = axis_index(h_target, h_d);
        inst = build_relu_hard_instance(h_d, h_eps, sources, target, h_homog, opts);
      } else {
        const GeneralActivation act = make_activation(g_act, g_x1, g_x2);
        double M = 0.0;
        if (g_M) {
          M = *g_M;
        } else {
          const ExtendedReal margin = activation_margin(act);
          if (margin.infinite)
            throw ContractError("activation margin is unbounded for '" + g_act + "'; pass --M explicitly");
          M = margin.value;
        }
        std::vector<Vec> sources;
        for (const auto& s : h_sources) sources.push_back(axis_vector(s, h_d));
        std::optional<std::size_t> target;
        if (!h_target.empty()) target = axis_index(h_target, h_d);
        inst = build_general_hard_instance(act, M, h_d, sources, target, opts);
      }
      emit(h_dump ? hard_instance_to_json(inst) : hard_json(inst).dump(2) + "\n", g.out, out);
      return 0;
    }

    if (cx->parsed()) {
      std::vector<Vec> data;
      if (!points.empty()) data = parse_points(points);
      else if (!data_path.empty()) data = load_points_csv(data_path);
      else throw ContractError("complexity needs --points or --data");
      FunctionClass fc = LinearBall{radius};
      if (cls == "net") {
        NetFamily fam;
        fam.widths = widths;
        fam.activation = activation_from_string(act_name);
        fam.budget.m_alpha = m_alpha;
        fam.budget.m_k = m_k;
        fam.budget.d_z = d_z;
        fc = fam;
      }
      const AscentOptions ascent{restarts, ascent_steps};
      const ComplexityEstimate est = kind == "gaussian" ? gaussian_complexity(fc, data, n_mc, g.seed, ascent)
                                                        : rademacher_complexity(fc, data, n_mc, g.seed, ascent);
      json j;
      j["kind"] = kind;
      j["mean"] = est.mean;
      j["std_error"] = est.std_error;
      j["n_mc"] = est.n_mc;
      j["sup_method"] = est.sup_method == SupMethod::exact_enumeration ? "exact_enumeration"
                        : est.sup_method == SupMethod::closed_form     ? "closed_form"
                                                                       : "projected_ascent";
      j["low_confidence"] = est.low_confidence;
      emit(j.dump(2) + "\n", g.out, out);
      return 0;
    }

    if (bd->parsed()) {
      double v = 0.0;
      if (bound_kind == "dnn") {
        NormBudget b;
        b.m_alpha = m_alpha;
        b.m_k = m_k;
        b.d_z = d_z;
        validate(b);
        if (b.m_k.size() != b_K) throw ContractError("--m-k needs one entry per layer (K = " + std::to_string(b_K) + ")");
        v = dnn_bound(b, b_K, b_dout, static_cast<std::size_t>(b_n));
      } else if (bound_kind == "chain") {
        v = chain_bound(b_dx, b_lf, b_gh, b_gf, static_cast<std::size_t>(b_n), b_T);
      } else if (bound_kind == "deviation") {
        v = deviation_term(b_g, b_n, b_delta);
      } else {
        v = target_bound(b_nu, b_mu, b_eso, b_g, b_n, b_delta);
      }
      emit(fmt(v) + "\n", g.out, out);
      return 0;
    }
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return kExitContract;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const BudgetExceeded& e) {
    err << "error: " << e.what() << '\n';
    return kExitBudget;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace divlab
