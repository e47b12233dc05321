#pragma once

// Lower-bound gadgets: unit-sphere packings, the thresholded ReLU family
// x -> [<x, w> - (1 - eps/4)]_+, and the general-activation family
// x -> sigma(8 (x1 - x2) <x, w> - 7 x1 + 8 x2).
//
// Construction: V is the set of packing points where every source vanishes
// (argument at or below the threshold), u is a point of V, h* sends every
// input to u, h is the identity and P_X is uniform on V' = V \ {u}. The
// source truths are then constant on the h* image while the target truth
// f_u(u) sits at the top of the family's range.

#include "divlab/diversity.hpp"
#include "divlab/extended_real.hpp"
#include "divlab/netcore.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace divlab {

enum class PackingStrategy { axes, greedy };

struct Packing {
  std::vector<Vec> vectors;
  double eps = 0.0;
  std::size_t requested = 0;  // greedy only
  bool complete = true;       // false when greedy gave up below `requested`
};

struct GreedyOptions {
  std::size_t count = 0;
  std::size_t rejection_budget = 10000;  // consecutive rejections before giving up
  std::uint64_t seed = 0;
};

// axes: +e1..+ed then -e1..-ed.
Packing make_packing(std::size_t d, double eps, PackingStrategy strategy, const GreedyOptions& greedy = {});

// Unit norms to 1e-12 and pairwise inner products <= 1 - eps + 1e-12.
void validate(const Packing& packing);

// Lifts each u to (u, 1)/sqrt(2); pairwise inner products become
// (<u, v> + 1)/2 <= 1 - eps/2, so the result packs at eps/2.
Packing homogenize(const Packing& packing);

double relu_family_eval(const Vec& w, const Vec& x, double eps);

struct GeneralActivation {
  std::function<double(double)> sigma;
  std::string name;
  double x1 = 1.0;
  double x2 = 0.0;
};

// Named activations: relu, sigmoid, softplus, tanh.
GeneralActivation make_activation(const std::string& name, double x1, double x2);

// sigma(8 (x1 - x2) <x, w> - 7 x1 + 8 x2)
double general_family_eval(const GeneralActivation& act, const Vec& w, const Vec& x);

// Checks |sigma(x1)| >= M sup_{x <= x2} |sigma(x)| on a grid over
// [x2 - span, x2]. Returns the measured ratio |sigma(x1)| / sup (inf when
// the sup is 0).
ExtendedReal activation_margin(const GeneralActivation& act, double span = 64.0, std::size_t points = 100001);

enum class HardFamily { relu, general };

struct HardInstance {
  Packing packing;
  HardFamily family = HardFamily::relu;
  double eps = 0.0;
  std::optional<GeneralActivation> activation;
  double M = 0.0;
  std::vector<Vec> source_params;
  Vec target_param;
  std::vector<Vec> support;     // V'
  std::vector<double> weights;  // uniform on V'
  Vec u;                        // image of h*
  double lower_bound = 0.0;     // eps^2/32 or (M-1)^2/8
  double source_excess = 0.0;
  double target_excess = 0.0;
  ExtendedReal ratio;
  // relu: source <= 1e-9 and target >= eps^2/32 - 1e-9.
  // general: ratio >= (M-1)^2/8 - 1e-6.
  bool bound_holds = false;

  double eval(const Vec& w, const Vec& x) const;
};

struct HardnessEvalOptions {
  std::size_t directions = 10000;
  std::uint64_t seed = 0x4A4D;
  bool refine = true;  // coordinate refinement of the best grid directions
};

struct HardnessEvaluation {
  double source_excess = 0.0;
  double target_excess = 0.0;
  ExtendedReal ratio;
};

// target_u is an index into the packing and must lie in V; by default the
// first point of V in packing order. ConstructionInfeasible when |V'| < 2.
HardInstance build_relu_hard_instance(const Packing& packing, const std::vector<Vec>& sources,
                                      std::optional<std::size_t> target_u = std::nullopt,
                                      const HardnessEvalOptions& opts = {});
HardInstance build_relu_hard_instance(std::size_t d, double eps, const std::vector<Vec>& sources,
                                      std::optional<std::size_t> target_u = std::nullopt,
                                      bool homogenized = false, const HardnessEvalOptions& opts = {});

// Uses eps = 1/2 and the axes packing in d dimensions.
HardInstance build_general_hard_instance(const GeneralActivation& act, double M, std::size_t d,
                                         const std::vector<Vec>& sources,
                                         std::optional<std::size_t> target_u = std::nullopt,
                                         const HardnessEvalOptions& opts = {});

// Infimum over the family, approximated from analytic candidates (0, the
// packing, sources, target, support points and their radial scalings)
// together with a direction grid: exact for d = 1, a circle for d = 2, a
// Fibonacci sphere for d = 3 and random directions above, the last two
// followed by coordinate refinement.
HardnessEvaluation evaluate_instance(const HardInstance& inst, const HardnessEvalOptions& opts = {});

// The same construction as a finite instance over the candidate class:
// H = {identity, h*}, F_so = F_ta = candidates, true_rep = h*.
FiniteInstance to_finite_instance(const HardInstance& inst);

}  // namespace divlab
