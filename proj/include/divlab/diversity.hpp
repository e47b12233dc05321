#pragma once

// Exact transferability/diversity on finite instances. Everything here is
// an enumeration over finite sets; continuous classes must be discretized
// by the caller, and the grid density is the caller's responsibility.

#include "divlab/extended_real.hpp"
#include "divlab/netcore.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace divlab {

// Inputs are a finite support with probabilities. Representations map each
// support point to an id in a finite feature alphabet; prediction functions
// are tabulated on that alphabet.
struct FiniteInstance {
  std::vector<double> weights;                            // P_X
  std::vector<Vec> features;                              // alphabet (may be empty)
  std::vector<std::vector<std::size_t>> representations;  // H[h][point] -> feature id
  std::vector<std::vector<Vec>> source_functions;         // F_so[f][feature]
  std::vector<std::vector<Vec>> target_functions;         // F_ta[f][feature]
  std::vector<std::size_t> sources;                       // true source tasks, into F_so
  std::size_t target_true = 0;                            // into F_ta
  std::size_t true_rep = 0;                               // into H

  std::size_t support_size() const { return weights.size(); }
  std::size_t feature_count() const;
};

void validate(const FiniteInstance& inst);

// Builds an instance from feature vectors and callable prediction
// functions, deduplicating features into the alphabet.
FiniteInstance make_instance(std::vector<double> weights,
                             const std::vector<std::vector<Vec>>& representation_features,
                             const std::vector<std::function<Vec(const Vec&)>>& source_functions,
                             const std::vector<std::function<Vec(const Vec&)>>& target_functions,
                             std::vector<std::size_t> sources, std::size_t target_true,
                             std::size_t true_rep);

// E_X ||f(h(X)) - g(h*(X))||^2 for tabulated f, g.
double excess(const FiniteInstance& inst, std::size_t h, const std::vector<Vec>& f,
              const std::vector<Vec>& truth);

struct ExcessTable {
  // source[h][f][t]: excess of F_so[f] under h against source task t
  std::vector<std::vector<std::vector<double>>> source;
  // target[h][f]: excess of F_ta[f] under h against the designated target
  std::vector<std::vector<double>> target;

  // inf over F_so^T of the task-averaged source excess
  double best_source(std::size_t h) const;
  double best_target(std::size_t h) const;
};

ExcessTable excess_table(const FiniteInstance& inst);

// inf_f E_ta(f, h) against an arbitrary target truth in F_ta.
double best_target_excess(const FiniteInstance& inst, std::size_t h, std::size_t target_truth);

struct DiversityCertificate {
  ExtendedReal nu_hat;
  double mu = 0.0;
  std::size_t worst_h = 0;
  std::optional<std::size_t> worst_target;
  std::vector<ExtendedReal> per_h_ratio;
  // Some h has zero source excess and target excess above mu, so no
  // finite nu exists at all (as opposed to exceeding nu_cap).
  bool unbounded = false;
};

// Smallest nu in [0, nu_cap] with inf_f E_ta(f,h) <= nu * inf E_so(h) + mu
// for every h. Each constraint is affine in nu, so the smallest feasible nu
// is max_h (E_ta - mu)_+ / E_so, computed directly. +inf when no
// nu <= nu_cap works.
DiversityCertificate transfer_ratio(const FiniteInstance& inst, double mu, double nu_cap = 1e6);
// Same, with the sup also taken over every target truth in F_ta.
DiversityCertificate diversity_ratio(const FiniteInstance& inst, double mu, double nu_cap = 1e6);

// Some h that minimizes the source excess while leaving target excess
// above 1e-12. Its existence forces nu = inf at mu = 0.
std::optional<std::size_t> negative_transfer_witness(const FiniteInstance& inst);

struct StackedTask {
  FiniteInstance instance;  // one K-output source task over M^K, target over M
  double nu = 0.0;
  double mu = 0.0;
};

// The K single-output source tasks of `tasks` (truths in a shared class M,
// with F_so = F_ta = M) become one K-output source task over the product
// class; the target side is unchanged. The stacked source excess is the sum
// of the per-task excesses, i.e. K times the task average, so a (nu, mu)
// certificate turns into (nu/K, mu/K). The nu/K part is exact; the mu/K part
// only when mu = 0, while (nu/K, mu) is valid for every mu.
StackedTask stack_multi_output(const FiniteInstance& tasks, double nu, double mu,
                               std::size_t max_product = 1000000);

struct DiversityConstants {
  double nu = 0.0;
  double mu = 0.0;
};

// (2 B*^2 B^4 nu, B*^2 mu); B, B* >= 1.
DiversityConstants softmax_ce_conversion(double nu, double mu, double B, double B_star);

enum class LossDirection { strongly_convex_c1, smooth_c2 };
// (nu/c, mu/c) for a c-strongly convex loss, (nu c, mu c) for a c-smooth one.
DiversityConstants loss_conversion(double nu, double mu, double c, LossDirection direction);

struct KlCheck {
  ExtendedReal kl;
  double lower = 0.0;
  std::optional<double> upper;  // absent when the upper leg does not apply
  bool ok = false;
};

// KL(p||q) against 0.5 (sum |p-q|)^2 below and (1/b^2) sum (p-q)^2 above.
// b > 0 requires min p >= b (ContractError otherwise). The upper leg is a
// chi-square bound and is only evaluated when additionally min q >= b^2
// and KL is finite; b <= 0 skips it.
KlCheck kl_sandwich_check(const std::vector<double>& p, const std::vector<double>& q, double b);

struct IdRankResult {
  bool holds = false;
  double max_error = 0.0;
};

// |f(x) - <w(f), phi(x)>| <= mu on the grid, after checking ||phi(x)|| <= 1
// and ||w(f)|| <= R (CertificateInvalid when violated).
IdRankResult idrank_certificate(const std::vector<Vec>& grid,
                                const std::vector<std::function<double(const Vec&)>>& functions,
                                const std::function<Vec(const Vec&)>& phi, const std::vector<Vec>& w,
                                double R, double mu);

struct BasisCertificate {
  std::size_t d = 0;
  double nu = 0.0;
  double mu = 0.0;
};

// Embedding vectors of d tasks that span R^d give a (d, mu) certificate.
BasisCertificate basis_task_diversity(const std::vector<Vec>& task_embeddings, double mu,
                                      double rank_tol = 1e-10);

// diversity_ratio(inst, cert.mu) <= cert.d on a finite instance.
bool cross_check_basis(const FiniteInstance& inst, const BasisCertificate& cert);

}  // namespace divlab
