#pragma once

// Eluder dimension of finite function classes on finite domains.
//
// x is (F, eps)-dependent on a sequence S when every pair f, g in F with
// sum_{s in S} ||f(s) - g(s)||^2 <= eps^2 also has ||f(x) - g(x)|| <= eps.
// For eps > 0 a point already in S is always dependent on S, so witness
// sequences never repeat and only the set of predecessors matters.

#include "divlab/extended_real.hpp"
#include "divlab/netcore.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace divlab {

struct FiniteClass {
  std::vector<std::string> domain;          // point labels
  std::vector<std::string> function_names;  // optional; empty means f0, f1, ...
  std::vector<std::vector<Vec>> values;     // values[f][x]

  std::size_t domain_size() const { return domain.size(); }
  std::size_t size() const { return values.size(); }
  std::string name(std::size_t f) const;
};

void validate(const FiniteClass& F);

// Scalar-valued convenience constructor; names the domain x0, x1, ...
FiniteClass make_class(const std::vector<std::vector<double>>& table);

bool is_dependent(std::size_t x, const std::vector<std::size_t>& seq, const FiniteClass& F, double eps);
// Same test against a squared threshold, so exact levels round-trip.
bool is_dependent_sq(std::size_t x, const std::vector<std::size_t>& seq, const FiniteClass& F, double eps_sq);

enum class EluderVariant { longest, shortest_cover };
enum class SearchStatus { ok, budget_exceeded };

struct EluderCertificate {
  SearchStatus status = SearchStatus::ok;
  std::size_t dim = 0;
  std::vector<std::size_t> witness;  // domain indices
  double epsilon = 0.0;              // requested eps
  double epsilon_used = 0.0;         // the eps' >= eps that realizes the witness
  double epsilon_used_sq = 0.0;      // exact squared level behind epsilon_used
  EluderVariant variant = EluderVariant::longest;
  std::size_t nodes = 0;
};

struct SearchOptions {
  std::size_t node_cap = 1000000;
};

// Longest sequence that, for some eps' >= eps, has every element
// eps'-independent of its predecessors. Ties go to the lexicographically
// least witness. Domains are limited to 63 points.
EluderCertificate eluder_dimension(const FiniteClass& F, double eps, const SearchOptions& opts = {});

// Shortest sequence making every domain point eps-dependent on it.
EluderCertificate shortest_cover_dimension(const FiniteClass& F, double eps, const SearchOptions& opts = {});

// Domain and functions swap roles: dual function x maps f to f(x).
FiniteClass dual_class(const FiniteClass& F);

struct AdversarialTask {
  std::size_t next_task = 0;  // f_{t+1}, an index into F
  std::size_t x1 = 0;
  std::size_t x2 = 0;
  double source_gap = 0.0;  // sum_i ||f_i(x1) - f_i(x2)||^2 <= eps^2
  double target_gap = 0.0;  // ||f_{t+1}(x1) - f_{t+1}(x2)||^2 >= eps^2
  // Learned representation: point mass on x1. True representation: uniform
  // over {x1, x2}. Both distributions are recorded as weights on the domain.
  std::vector<double> learned_distribution;
  std::vector<double> true_distribution;
  double source_excess = 0.0;  // task-averaged, inf over F per task
  double target_excess = 0.0;
  ExtendedReal ratio;
};

// Finds a task that is (F*, eps)-independent of the chosen ones, and
// measures the excess errors of the two-point construction by enumerating
// F. ContractError when every remaining task is dependent.
AdversarialTask adversarial_task(const FiniteClass& F, const std::vector<std::size_t>& chosen, double eps);

}  // namespace divlab
