#include "divlab/hardness.hpp"

#include "divlab/error.hpp"
#include "divlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace divlab {

namespace {

constexpr double kNormTol = 1e-12;

Vec unit(std::size_t d, std::size_t i, double sign) {
  Vec v = Vec::Zero(static_cast<Eigen::Index>(d));
  v(static_cast<Eigen::Index>(i)) = sign;
  return v;
}

Vec random_direction(std::size_t d, Rng& rng) {
  Vec v(static_cast<Eigen::Index>(d));
  do {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  } while (v.norm() == 0.0);
  return v / v.norm();
}

}  // namespace

Packing make_packing(std::size_t d, double eps, PackingStrategy strategy, const GreedyOptions& greedy) {
  if (d < 1) throw ContractError("make_packing: d must be >= 1");
  if (!(eps > 0.0 && eps <= 1.0)) throw ContractError("make_packing: eps must lie in (0, 1]");
  Packing p;
  p.eps = eps;
  if (strategy == PackingStrategy::axes) {
    for (std::size_t i = 0; i < d; ++i) p.vectors.push_back(unit(d, i, 1.0));
    for (std::size_t i = 0; i < d; ++i) p.vectors.push_back(unit(d, i, -1.0));
    p.requested = p.vectors.size();
  } else {
    if (greedy.count < 1) throw ContractError("make_packing: greedy needs a requested count");
    p.requested = greedy.count;
    Rng rng(greedy.seed);
    std::size_t rejected = 0;
    while (p.vectors.size() < greedy.count && rejected < greedy.rejection_budget) {
      const Vec v = random_direction(d, rng);
      const bool fits = std::all_of(p.vectors.begin(), p.vectors.end(),
                                    [&](const Vec& u) { return u.dot(v) <= 1.0 - eps; });
      if (fits) {
        p.vectors.push_back(v);
        rejected = 0;
      } else {
        ++rejected;
      }
    }
    p.complete = p.vectors.size() == greedy.count;
  }
  validate(p);
  return p;
}

void validate(const Packing& packing) {
  for (std::size_t i = 0; i < packing.vectors.size(); ++i) {
    if (std::abs(packing.vectors[i].norm() - 1.0) > kNormTol)
      throw ContractError("packing vector " + std::to_string(i) + " is not unit norm");
    for (std::size_t j = i + 1; j < packing.vectors.size(); ++j) {
      if (packing.vectors[j].size() != packing.vectors[i].size()) throw ShapeError("packing dimensions differ");
      if (packing.vectors[i].dot(packing.vectors[j]) > 1.0 - packing.eps + kNormTol)
        throw ContractError("packing vectors " + std::to_string(i) + ", " + std::to_string(j) +
                            " are closer than 1 - eps");
    }
  }
}

Packing homogenize(const Packing& packing) {
  Packing out;
  out.eps = packing.eps / 2.0;
  out.requested = packing.requested;
  out.complete = packing.complete;
  for (const Vec& u : packing.vectors) {
    Vec v(u.size() + 1);
    v.head(u.size()) = u;
    v(u.size()) = 1.0;
    out.vectors.push_back(v / std::numbers::sqrt2);
  }
  validate(out);
  return out;
}

double relu_family_eval(const Vec& w, const Vec& x, double eps) {
  if (w.norm() > 1.0 + kNormTol || x.norm() > 1.0 + kNormTol)
    throw ContractError("relu_family_eval: w and x must lie in the unit ball");
  if (w.size() != x.size()) throw ShapeError("relu_family_eval: w and x differ in dimension");
  return std::max(0.0, w.dot(x) - (1.0 - eps / 4.0));
}

GeneralActivation make_activation(const std::string& name, double x1, double x2) {
  GeneralActivation act;
  act.name = name;
  act.x1 = x1;
  act.x2 = x2;
  if (name == "relu") act.sigma = [](double t) { return std::max(0.0, t); };
  else if (name == "sigmoid") act.sigma = [](double t) { return 1.0 / (1.0 + std::exp(-t)); };
  else if (name == "softplus") act.sigma = [](double t) { return t > 30.0 ? t : std::log1p(std::exp(t)); };
  else if (name == "tanh") act.sigma = [](double t) { return std::tanh(t); };
  else throw ContractError("unknown activation '" + name + "'");
  return act;
}

double general_family_eval(const GeneralActivation& act, const Vec& w, const Vec& x) {
  if (w.norm() > 1.0 + kNormTol || x.norm() > 1.0 + kNormTol)
    throw ContractError("general_family_eval: w and x must lie in the unit ball");
  if (w.size() != x.size()) throw ShapeError("general_family_eval: w and x differ in dimension");
  return act.sigma(8.0 * (act.x1 - act.x2) * w.dot(x) - 7.0 * act.x1 + 8.0 * act.x2);
}

ExtendedReal activation_margin(const GeneralActivation& act, double span, std::size_t points) {
  if (!(act.x1 > act.x2)) throw ContractError("activation precondition needs x1 > x2");
  if (points < 2 || !(span > 0.0)) throw ContractError("activation_margin: bad grid");
  double sup = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = act.x2 - span * static_cast<double>(i) / static_cast<double>(points - 1);
    sup = std::max(sup, std::abs(act.sigma(x)));
  }
  return safe_ratio(std::abs(act.sigma(act.x1)), sup);
}

double HardInstance::eval(const Vec& w, const Vec& x) const {
  return family == HardFamily::relu ? relu_family_eval(w, x, eps) : general_family_eval(*activation, w, x);
}

namespace {

using Objective = std::function<double(const Vec&)>;

std::vector<Vec> candidate_params(const HardInstance& inst) {
  const std::size_t d = static_cast<std::size_t>(inst.u.size());
  std::vector<Vec> base;
  for (const Vec& v : inst.packing.vectors) base.push_back(v);
  for (const Vec& v : inst.source_params) base.push_back(v);
  base.push_back(inst.target_param);
  for (const Vec& v : inst.support) base.push_back(v);
  std::vector<Vec> out{Vec::Zero(static_cast<Eigen::Index>(d))};
  for (const Vec& v : base) {
    out.push_back(v);
    out.push_back(-v);
    for (double s : {0.25, 0.5, 0.75}) out.push_back(s * v);
  }
  return out;
}

std::vector<Vec> direction_grid(std::size_t d, std::size_t n, std::uint64_t seed) {
  std::vector<Vec> out;
  if (d == 1) {
    // The unit ball is [-1, 1]; sample it directly.
    for (std::size_t i = 0; i < n; ++i)
      out.push_back(Vec::Constant(1, -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1)));
  } else if (d == 2) {
    for (std::size_t i = 0; i < n; ++i) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
      Vec v(2);
      v << std::cos(a), std::sin(a);
      out.push_back(v);
    }
  } else if (d == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < n; ++i) {
      const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double a = golden * static_cast<double>(i);
      Vec v(3);
      v << r * std::cos(a), r * std::sin(a), z;
      out.push_back(v);
    }
  } else {
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) out.push_back(random_direction(d, rng));
  }
  return out;
}

Vec project_ball(Vec w) {
  const double n = w.norm();
  if (n > 1.0) w /= n;
  return w;
}

Vec refine(const Objective& J, Vec w, double& value) {
  for (double step = 0.1; step > 1e-7; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (Eigen::Index i = 0; i < w.size(); ++i)
        for (double sgn : {1.0, -1.0}) {
          Vec trial = w;
          trial(i) += sgn * step;
          trial = project_ball(std::move(trial));
          const double v = J(trial);
          if (v < value) {
            value = v;
            w = std::move(trial);
            improved = true;
          }
        }
    }
  }
  return w;
}

double family_infimum(const HardInstance& inst, const Objective& J, const std::vector<Vec>& candidates,
                      const std::vector<Vec>& grid, bool do_refine) {
  double best = std::numeric_limits<double>::infinity();
  Vec best_w;
  for (const auto* set : {&candidates, &grid})
    for (const Vec& w : *set) {
      const double v = J(w);
      if (v < best) {
        best = v;
        best_w = w;
      }
    }
  if (do_refine && inst.u.size() >= 2 && best > 0.0) refine(J, best_w, best);
  return best;
}

Objective mean_square_against(const HardInstance& inst, double truth) {
  return [&inst, truth](const Vec& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < inst.support.size(); ++i) {
      const double r = inst.eval(w, inst.support[i]) - truth;
      s += inst.weights[i] * r * r;
    }
    return s;
  };
}

struct Skeleton {
  std::vector<std::size_t> vanishing;  // V, as packing indices
  std::size_t u = 0;
};

Skeleton choose_points(const Packing& packing, const std::vector<Vec>& sources, double threshold,
                       std::optional<std::size_t> target_u) {
  if (sources.empty()) throw ContractError("hard instance needs at least one source");
  const Eigen::Index d = packing.vectors.front().size();
  for (const Vec& w : sources) {
    if (w.size() != d) throw ShapeError("source parameter dimension does not match the packing");
    if (w.norm() > 1.0 + kNormTol) throw ContractError("source parameters must lie in the unit ball");
  }
  Skeleton sk;
  for (std::size_t i = 0; i < packing.vectors.size(); ++i) {
    const bool vanishes = std::all_of(sources.begin(), sources.end(),
                                      [&](const Vec& w) { return w.dot(packing.vectors[i]) <= threshold; });
    if (vanishes) sk.vanishing.push_back(i);
  }
  if (sk.vanishing.empty()) throw ConstructionInfeasible("no packing point is left where every source vanishes");
  if (target_u) {
    if (*target_u >= packing.vectors.size()) throw ContractError("target_u is not a packing index");
    if (std::find(sk.vanishing.begin(), sk.vanishing.end(), *target_u) == sk.vanishing.end())
      throw ContractError("target_u must be a point where every source vanishes");
    sk.u = *target_u;
  } else {
    sk.u = sk.vanishing.front();
  }
  if (sk.vanishing.size() < 3)
    throw ConstructionInfeasible("the evaluation support V' has " + std::to_string(sk.vanishing.size() - 1) +
                                 " point(s); the separation needs at least 2");
  return sk;
}

void fill(HardInstance& inst, const Skeleton& sk, const HardnessEvalOptions& opts) {
  inst.u = inst.packing.vectors[sk.u];
  inst.target_param = inst.u;
  for (std::size_t i : sk.vanishing)
    if (i != sk.u) inst.support.push_back(inst.packing.vectors[i]);
  inst.weights.assign(inst.support.size(), 1.0 / static_cast<double>(inst.support.size()));
  const HardnessEvaluation ev = evaluate_instance(inst, opts);
  inst.source_excess = ev.source_excess;
  inst.target_excess = ev.target_excess;
  inst.ratio = ev.ratio;
}

}  // namespace

HardnessEvaluation evaluate_instance(const HardInstance& inst, const HardnessEvalOptions& opts) {
  if (inst.support.empty() || inst.weights.size() != inst.support.size())
    throw ContractError("evaluate_instance: instance has no evaluation support");
  if (opts.directions < 2) throw ContractError("evaluate_instance: need at least 2 grid directions");
  const std::size_t d = static_cast<std::size_t>(inst.u.size());
  const std::vector<Vec> candidates = candidate_params(inst);
  const std::vector<Vec> grid = direction_grid(d, opts.directions, opts.seed);

  HardnessEvaluation ev;
  double src = 0.0;
  for (const Vec& w : inst.source_params)
    src += family_infimum(inst, mean_square_against(inst, inst.eval(w, inst.u)), candidates, grid, opts.refine);
  ev.source_excess = src / static_cast<double>(inst.source_params.size());
  ev.target_excess = family_infimum(inst, mean_square_against(inst, inst.eval(inst.target_param, inst.u)),
                                    candidates, grid, opts.refine);
  ev.ratio = safe_ratio(ev.target_excess, ev.source_excess);
  return ev;
}

HardInstance build_relu_hard_instance(const Packing& packing, const std::vector<Vec>& sources,
                                      std::optional<std::size_t> target_u, const HardnessEvalOptions& opts) {
  validate(packing);
  if (packing.vectors.empty()) throw ConstructionInfeasible("empty packing");
  HardInstance inst;
  inst.packing = packing;
  inst.family = HardFamily::relu;
  inst.eps = packing.eps;
  inst.source_params = sources;
  inst.lower_bound = packing.eps * packing.eps / 32.0;
  fill(inst, choose_points(packing, sources, 1.0 - packing.eps / 4.0, target_u), opts);
  inst.bound_holds = inst.source_excess <= 1e-9 && inst.target_excess >= inst.lower_bound - 1e-9;
  return inst;
}

HardInstance build_relu_hard_instance(std::size_t d, double eps, const std::vector<Vec>& sources,
                                      std::optional<std::size_t> target_u, bool homogenized,
                                      const HardnessEvalOptions& opts) {
  Packing p = make_packing(d, eps, PackingStrategy::axes);
  if (!homogenized) return build_relu_hard_instance(p, sources, target_u, opts);
  std::vector<Vec> lifted;
  for (const Vec& w : sources) {
    Vec v(w.size() + 1);
    v.head(w.size()) = w;
    v(w.size()) = 1.0;
    lifted.push_back(v / std::numbers::sqrt2);
  }
  return build_relu_hard_instance(homogenize(p), lifted, target_u, opts);
}

HardInstance build_general_hard_instance(const GeneralActivation& act, double M, std::size_t d,
                                         const std::vector<Vec>& sources, std::optional<std::size_t> target_u,
                                         const HardnessEvalOptions& opts) {
  if (!act.sigma) throw ContractError("general hard instance needs an activation");
  if (!(M > 0.0)) throw ContractError("M must be > 0");
  const ExtendedReal margin = activation_margin(act);
  // Relative slack absorbs rounding when M is the exact margin, e.g.
  // sigmoid(4)/sigmoid(-4) = e^4.
  if (!margin.at_least(M * (1.0 - 1e-12)))
    throw ContractError("activation precondition fails: |sigma(x1)| / sup_{x <= x2} |sigma(x)| = " +
                        margin.to_string() + " < M = " + std::to_string(M));
  HardInstance inst;
  inst.packing = make_packing(d, 0.5, PackingStrategy::axes);
  inst.family = HardFamily::general;
  inst.eps = 0.5;
  inst.activation = act;
  inst.M = M;
  inst.source_params = sources;
  inst.lower_bound = (M - 1.0) * (M - 1.0) / 8.0;
  // <w, v> <= 1 - eps/4 = 7/8 puts the argument at or below x2.
  fill(inst, choose_points(inst.packing, sources, 7.0 / 8.0, target_u), opts);
  inst.bound_holds = inst.ratio.at_least(inst.lower_bound - 1e-6);
  return inst;
}

FiniteInstance to_finite_instance(const HardInstance& inst) {
  FiniteInstance fi;
  fi.weights = inst.weights;
  fi.features = inst.support;
  fi.features.push_back(inst.u);
  const std::size_t u_id = fi.features.size() - 1;
  std::vector<std::size_t> identity(inst.support.size());
  for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = i;
  fi.representations = {identity, std::vector<std::size_t>(inst.support.size(), u_id)};
  fi.true_rep = 1;

  std::vector<Vec> params = inst.source_params;
  params.push_back(inst.target_param);
  for (const Vec& v : candidate_params(inst)) params.push_back(v);
  for (const Vec& w : params) {
    std::vector<Vec> row;
    for (const Vec& z : fi.features) row.push_back(Vec::Constant(1, inst.eval(w, z)));
    fi.source_functions.push_back(row);
  }
  fi.target_functions = fi.source_functions;
  for (std::size_t t = 0; t < inst.source_params.size(); ++t) fi.sources.push_back(t);
  fi.target_true = inst.source_params.size();
  validate(fi);
  return fi;
}

}  // namespace divlab
