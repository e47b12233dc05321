#include "divlab/diversity.hpp"

#include "divlab/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <string>

namespace divlab {

std::string ExtendedReal::to_string() const {
  if (infinite) return "inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

ExtendedReal safe_ratio(double a, double b) {
  if (b > 0.0) return ExtendedReal::finite(a / b);
  if (a > 0.0) return ExtendedReal::inf();
  return ExtendedReal::finite(0.0);
}

std::size_t FiniteInstance::feature_count() const {
  if (!features.empty()) return features.size();
  if (!source_functions.empty()) return source_functions.front().size();
  if (!target_functions.empty()) return target_functions.front().size();
  return 0;
}

namespace {

void check_table(const std::vector<std::vector<Vec>>& table, std::size_t n_features, const char* name) {
  if (table.empty()) throw ContractError(std::string(name) + " is empty");
  const Eigen::Index dim = table.front().empty() ? 0 : table.front().front().size();
  for (std::size_t f = 0; f < table.size(); ++f) {
    if (table[f].size() != n_features)
      throw ShapeError(std::string(name) + "[" + std::to_string(f) + "] has " +
                       std::to_string(table[f].size()) + " entries, expected " + std::to_string(n_features));
    for (const Vec& v : table[f])
      if (v.size() != dim) throw ShapeError(std::string(name) + " has inconsistent output dimensions");
  }
}

}  // namespace

void validate(const FiniteInstance& inst) {
  if (inst.weights.empty()) throw ContractError("instance support is empty");
  double total = 0.0;
  for (double w : inst.weights) {
    if (!(w >= 0.0)) throw ContractError("instance weights must be >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("instance weights sum to " + std::to_string(total));
  const std::size_t nf = inst.feature_count();
  if (inst.representations.empty()) throw ContractError("representation class is empty");
  for (const auto& h : inst.representations) {
    if (h.size() != inst.support_size()) throw ShapeError("representation does not cover the support");
    for (std::size_t id : h)
      if (id >= nf) throw ShapeError("representation maps to unknown feature " + std::to_string(id));
  }
  check_table(inst.source_functions, nf, "F_so");
  check_table(inst.target_functions, nf, "F_ta");
  if (inst.sources.empty()) throw ContractError("instance needs at least one source task");
  for (std::size_t s : inst.sources)
    if (s >= inst.source_functions.size()) throw ContractError("source index out of range");
  if (inst.target_true >= inst.target_functions.size()) throw ContractError("target index out of range");
  if (inst.true_rep >= inst.representations.size()) throw ContractError("true representation out of range");
}

FiniteInstance make_instance(std::vector<double> weights,
                             const std::vector<std::vector<Vec>>& representation_features,
                             const std::vector<std::function<Vec(const Vec&)>>& source_functions,
                             const std::vector<std::function<Vec(const Vec&)>>& target_functions,
                             std::vector<std::size_t> sources, std::size_t target_true,
                             std::size_t true_rep) {
  FiniteInstance inst;
  inst.weights = std::move(weights);
  auto intern = [&inst](const Vec& z) {
    for (std::size_t i = 0; i < inst.features.size(); ++i)
      if (inst.features[i].size() == z.size() && inst.features[i] == z) return i;
    inst.features.push_back(z);
    return inst.features.size() - 1;
  };
  for (const auto& rep : representation_features) {
    std::vector<std::size_t> ids;
    for (const Vec& z : rep) ids.push_back(intern(z));
    inst.representations.push_back(std::move(ids));
  }
  auto tabulate = [&inst](const std::vector<std::function<Vec(const Vec&)>>& fs) {
    std::vector<std::vector<Vec>> table;
    for (const auto& f : fs) {
      std::vector<Vec> row;
      for (const Vec& z : inst.features) row.push_back(f(z));
      table.push_back(std::move(row));
    }
    return table;
  };
  inst.source_functions = tabulate(source_functions);
  inst.target_functions = tabulate(target_functions);
  inst.sources = std::move(sources);
  inst.target_true = target_true;
  inst.true_rep = true_rep;
  validate(inst);
  return inst;
}

double excess(const FiniteInstance& inst, std::size_t h, const std::vector<Vec>& f,
              const std::vector<Vec>& truth) {
  const auto& rep = inst.representations.at(h);
  const auto& star = inst.representations[inst.true_rep];
  double total = 0.0;
  for (std::size_t i = 0; i < inst.weights.size(); ++i)
    total += inst.weights[i] * (f[rep[i]] - truth[star[i]]).squaredNorm();
  return total;
}

double ExcessTable::best_source(std::size_t h) const {
  const auto& per_f = source.at(h);
  const std::size_t T = per_f.front().size();
  double sum = 0.0;
  // The joint infimum over F_so^T separates into one infimum per task.
  for (std::size_t t = 0; t < T; ++t) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& row : per_f) best = std::min(best, row[t]);
    sum += best;
  }
  return sum / static_cast<double>(T);
}

double ExcessTable::best_target(std::size_t h) const {
  return *std::min_element(target.at(h).begin(), target.at(h).end());
}

ExcessTable excess_table(const FiniteInstance& inst) {
  validate(inst);
  ExcessTable table;
  for (std::size_t h = 0; h < inst.representations.size(); ++h) {
    std::vector<std::vector<double>> src;
    for (const auto& f : inst.source_functions) {
      std::vector<double> per_task;
      for (std::size_t s : inst.sources) per_task.push_back(excess(inst, h, f, inst.source_functions[s]));
      src.push_back(std::move(per_task));
    }
    table.source.push_back(std::move(src));
    std::vector<double> tgt;
    for (const auto& f : inst.target_functions)
      tgt.push_back(excess(inst, h, f, inst.target_functions[inst.target_true]));
    table.target.push_back(std::move(tgt));
  }
  return table;
}

double best_target_excess(const FiniteInstance& inst, std::size_t h, std::size_t target_truth) {
  const auto& truth = inst.target_functions.at(target_truth);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& f : inst.target_functions) best = std::min(best, excess(inst, h, f, truth));
  return best;
}

namespace {

struct RatioTerm {
  std::size_t h;
  std::optional<std::size_t> target;
  double numerator;    // inf_f E_ta(f, h)
  double denominator;  // inf E_so(h)
};

// The condition A <= nu (B + mu/nu) = nu B + mu is affine in nu for each
// term, so the smallest feasible nu is max over terms of (A - mu)/B,
// clipped at 0. This is the exact fixed point a bisection would approach.
DiversityCertificate certify(const std::vector<RatioTerm>& terms, double mu, double nu_cap) {
  if (!(mu >= 0.0)) throw ContractError("mu must be >= 0");
  if (!(nu_cap > 0.0)) throw ContractError("nu_cap must be > 0");
  DiversityCertificate cert;
  cert.mu = mu;
  ExtendedReal worst = ExtendedReal::finite(0.0);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const RatioTerm& t = terms[i];
    ExtendedReal need = ExtendedReal::finite(0.0);
    if (t.numerator > mu) {
      if (t.denominator > 0.0) {
        need = ExtendedReal::finite((t.numerator - mu) / t.denominator);
      } else {
        need = ExtendedReal::inf();
        cert.unbounded = true;
      }
    }
    if (i == 0 || worst < need) {
      worst = need;
      cert.worst_h = t.h;
      cert.worst_target = t.target;
    }
  }
  const bool infinite = worst.exceeds(nu_cap);
  const double nu = infinite ? 0.0 : worst.value;
  cert.nu_hat = infinite ? ExtendedReal::inf() : ExtendedReal::finite(nu);

  std::map<std::size_t, ExtendedReal> per_h;
  for (const RatioTerm& t : terms) {
    ExtendedReal r;
    if (infinite || (nu == 0.0 && mu == 0.0)) {
      r = safe_ratio(t.numerator, t.denominator);
    } else if (nu == 0.0) {
      r = ExtendedReal::finite(0.0);
    } else {
      // Mathematically <= nu; the clamp only removes rounding excess.
      r = ExtendedReal::finite(std::min(t.numerator / (t.denominator + mu / nu), nu));
    }
    auto it = per_h.find(t.h);
    if (it == per_h.end()) per_h.emplace(t.h, r);
    else if (it->second < r) it->second = r;
  }
  for (const auto& [h, r] : per_h) cert.per_h_ratio.push_back(r);
  return cert;
}

}  // namespace

DiversityCertificate transfer_ratio(const FiniteInstance& inst, double mu, double nu_cap) {
  const ExcessTable table = excess_table(inst);
  std::vector<RatioTerm> terms;
  for (std::size_t h = 0; h < inst.representations.size(); ++h)
    terms.push_back({h, std::nullopt, table.best_target(h), table.best_source(h)});
  return certify(terms, mu, nu_cap);
}

DiversityCertificate diversity_ratio(const FiniteInstance& inst, double mu, double nu_cap) {
  const ExcessTable table = excess_table(inst);
  std::vector<RatioTerm> terms;
  for (std::size_t h = 0; h < inst.representations.size(); ++h) {
    const double b = table.best_source(h);
    for (std::size_t j = 0; j < inst.target_functions.size(); ++j)
      terms.push_back({h, j, best_target_excess(inst, h, j), b});
  }
  return certify(terms, mu, nu_cap);
}

std::optional<std::size_t> negative_transfer_witness(const FiniteInstance& inst) {
  const ExcessTable table = excess_table(inst);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t h = 0; h < inst.representations.size(); ++h) best = std::min(best, table.best_source(h));
  for (std::size_t h = 0; h < inst.representations.size(); ++h)
    if (table.best_source(h) <= best + 1e-12 && table.best_target(h) > 1e-12) return h;
  return std::nullopt;
}

namespace {

bool same_table(const std::vector<std::vector<Vec>>& a, const std::vector<std::vector<Vec>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t f = 0; f < a.size(); ++f) {
    if (a[f].size() != b[f].size()) return false;
    for (std::size_t z = 0; z < a[f].size(); ++z)
      if (a[f][z].size() != b[f][z].size() || a[f][z] != b[f][z]) return false;
  }
  return true;
}

std::vector<std::vector<Vec>> product_table(const std::vector<std::vector<Vec>>& base, std::size_t K) {
  const std::size_t n = base.size();
  std::size_t total = 1;
  for (std::size_t k = 0; k < K; ++k) total *= n;
  const std::size_t n_features = base.front().size();
  std::vector<std::vector<Vec>> out(total, std::vector<Vec>(n_features, Vec(static_cast<Eigen::Index>(K))));
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    // coordinate K-1 is the least significant digit
    for (std::size_t k = K; k-- > 0;) {
      const std::size_t f = rest % n;
      rest /= n;
      for (std::size_t z = 0; z < n_features; ++z) out[idx][z](static_cast<Eigen::Index>(k)) = base[f][z](0);
    }
  }
  return out;
}

std::size_t tuple_index(const std::vector<std::size_t>& digits, std::size_t n) {
  std::size_t idx = 0;
  for (std::size_t d : digits) idx = idx * n + d;
  return idx;
}

}  // namespace

StackedTask stack_multi_output(const FiniteInstance& tasks, double nu, double mu, std::size_t max_product) {
  validate(tasks);
  if (!(nu >= 0.0) || !(mu >= 0.0)) throw ContractError("stack_multi_output: nu and mu must be >= 0");
  if (!same_table(tasks.source_functions, tasks.target_functions))
    throw ContractError("stack_multi_output: source and target classes differ");
  if (tasks.source_functions.front().front().size() != 1)
    throw ContractError("stack_multi_output: tasks must be single-output");
  const std::size_t K = tasks.sources.size();
  const std::size_t n = tasks.source_functions.size();
  double members = 1.0;
  for (std::size_t k = 0; k < K; ++k) members *= static_cast<double>(n);
  if (members > static_cast<double>(max_product))
    throw ContractError("stack_multi_output: product class has " + std::to_string(members) + " members, cap " +
                        std::to_string(max_product));

  StackedTask out;
  FiniteInstance& s = out.instance;
  s.weights = tasks.weights;
  s.features = tasks.features;
  s.representations = tasks.representations;
  s.true_rep = tasks.true_rep;
  s.source_functions = product_table(tasks.source_functions, K);
  s.target_functions = tasks.target_functions;
  s.target_true = tasks.target_true;
  s.sources = {tuple_index(tasks.sources, n)};
  validate(s);
  out.nu = nu / static_cast<double>(K);
  out.mu = mu / static_cast<double>(K);
  return out;
}

DiversityConstants softmax_ce_conversion(double nu, double mu, double B, double B_star) {
  if (!(B >= 1.0) || !(B_star >= 1.0)) throw ContractError("softmax_ce_conversion: B and B_star must be >= 1");
  if (!(nu >= 0.0) || !(mu >= 0.0)) throw ContractError("softmax_ce_conversion: nu and mu must be >= 0");
  const double bs2 = B_star * B_star;
  return {2.0 * bs2 * std::pow(B, 4) * nu, bs2 * mu};
}

DiversityConstants loss_conversion(double nu, double mu, double c, LossDirection direction) {
  if (!(c > 0.0)) throw ContractError("loss_conversion: c must be > 0");
  if (direction == LossDirection::strongly_convex_c1) return {nu / c, mu / c};
  return {nu * c, mu * c};
}

KlCheck kl_sandwich_check(const std::vector<double>& p, const std::vector<double>& q, double b) {
  if (p.empty() || p.size() != q.size()) throw ContractError("kl_sandwich_check: p and q must share an alphabet");
  auto check_dist = [](const std::vector<double>& v, const char* name) {
    double s = 0.0;
    for (double x : v) {
      if (!(x >= 0.0)) throw ContractError(std::string(name) + " has a negative entry");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ContractError(std::string(name) + " does not sum to 1");
  };
  check_dist(p, "p");
  check_dist(q, "q");
  const double min_p = *std::min_element(p.begin(), p.end());
  const double min_q = *std::min_element(q.begin(), q.end());
  if (b > 0.0 && min_p < b) throw ContractError("kl_sandwich_check: min p is below b");

  KlCheck out;
  double kl = 0.0, l1 = 0.0, l2 = 0.0;
  bool infinite = false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    l1 += std::abs(p[i] - q[i]);
    l2 += (p[i] - q[i]) * (p[i] - q[i]);
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) infinite = true;
    else kl += p[i] * std::log(p[i] / q[i]);
  }
  out.kl = infinite ? ExtendedReal::inf() : ExtendedReal::finite(std::max(kl, 0.0));
  out.lower = 0.5 * l1 * l1;
  constexpr double slack = 1e-12;
  out.ok = out.kl.at_least(out.lower - slack);
  // KL <= chi^2(p||q) <= sum (p-q)^2 / min q, and min q >= b^2 makes that
  // at most the stated (1/b^2) sum (p-q)^2.
  if (b > 0.0 && !infinite && min_q >= b * b) {
    out.upper = l2 / (b * b);
    out.ok = out.ok && out.kl.value <= *out.upper + slack;
  }
  return out;
}

IdRankResult idrank_certificate(const std::vector<Vec>& grid,
                                const std::vector<std::function<double(const Vec&)>>& functions,
                                const std::function<Vec(const Vec&)>& phi, const std::vector<Vec>& w,
                                double R, double mu) {
  if (functions.size() != w.size()) throw ContractError("idrank_certificate: need one w per function");
  if (!(R > 0.0) || !(mu >= 0.0)) throw ContractError("idrank_certificate: need R > 0 and mu >= 0");
  constexpr double tol = 1e-12;
  std::vector<Vec> features;
  for (const Vec& x : grid) {
    Vec z = phi(x);
    if (z.norm() > 1.0 + tol)
      throw CertificateInvalid("idrank_certificate: ||phi(x)|| = " + std::to_string(z.norm()) + " > 1");
    features.push_back(std::move(z));
  }
  for (std::size_t j = 0; j < w.size(); ++j)
    if (w[j].norm() > R + tol)
      throw CertificateInvalid("idrank_certificate: ||w(f_" + std::to_string(j) + ")|| = " +
                               std::to_string(w[j].norm()) + " > R");
  IdRankResult out;
  for (std::size_t j = 0; j < functions.size(); ++j)
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (features[i].size() != w[j].size()) throw ShapeError("idrank_certificate: phi and w dimensions differ");
      out.max_error = std::max(out.max_error, std::abs(functions[j](grid[i]) - w[j].dot(features[i])));
    }
  out.holds = out.max_error <= mu + tol;
  return out;
}

BasisCertificate basis_task_diversity(const std::vector<Vec>& task_embeddings, double mu, double rank_tol) {
  if (task_embeddings.empty()) throw ContractError("basis_task_diversity: no task embeddings");
  if (!(mu >= 0.0)) throw ContractError("basis_task_diversity: mu must be >= 0");
  const Eigen::Index d = task_embeddings.front().size();
  Mat m(d, static_cast<Eigen::Index>(task_embeddings.size()));
  for (std::size_t j = 0; j < task_embeddings.size(); ++j) {
    if (task_embeddings[j].size() != d) throw ShapeError("basis_task_diversity: embeddings differ in dimension");
    m.col(static_cast<Eigen::Index>(j)) = task_embeddings[j];
  }
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& s = svd.singularValues();
  const double top = s.size() > 0 ? s(0) : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > rank_tol * std::max(1.0, top)) ++rank;
  if (rank < d)
    throw ContractError("basis_task_diversity: task embeddings have rank " + std::to_string(rank) +
                        " in dimension " + std::to_string(d));
  return {static_cast<std::size_t>(d), static_cast<double>(d), mu};
}

bool cross_check_basis(const FiniteInstance& inst, const BasisCertificate& cert) {
  return diversity_ratio(inst, cert.mu).nu_hat <= ExtendedReal::finite(cert.nu + 1e-9);
}

}  // namespace divlab
