#include "divlab/eluder.hpp"

#include "divlab/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

namespace divlab {

std::string FiniteClass::name(std::size_t f) const {
  return f < function_names.size() ? function_names[f] : "f" + std::to_string(f);
}

void validate(const FiniteClass& F) {
  if (F.values.empty()) throw ContractError("finite class has no functions");
  if (!F.function_names.empty() && F.function_names.size() != F.values.size())
    throw ShapeError("finite class: function_names does not match the table");
  const Eigen::Index dim = F.domain.empty() || F.values.front().empty() ? 0 : F.values.front().front().size();
  for (const auto& row : F.values) {
    if (row.size() != F.domain.size()) throw ShapeError("finite class table is not rectangular");
    for (const Vec& v : row)
      if (v.size() != dim) throw ShapeError("finite class has inconsistent output dimensions");
  }
}

FiniteClass make_class(const std::vector<std::vector<double>>& table) {
  FiniteClass F;
  if (!table.empty())
    for (std::size_t x = 0; x < table.front().size(); ++x) F.domain.push_back("x" + std::to_string(x));
  for (const auto& row : table) {
    std::vector<Vec> r;
    for (double v : row) r.push_back(Vec::Constant(1, v));
    F.values.push_back(std::move(r));
  }
  validate(F);
  return F;
}

bool is_dependent(std::size_t x, const std::vector<std::size_t>& seq, const FiniteClass& F, double eps) {
  return is_dependent_sq(x, seq, F, eps * eps);
}

bool is_dependent_sq(std::size_t x, const std::vector<std::size_t>& seq, const FiniteClass& F, double e2) {
  validate(F);
  if (x >= F.domain_size()) throw ContractError("is_dependent: point out of range");
  for (std::size_t s : seq)
    if (s >= F.domain_size()) throw ContractError("is_dependent: sequence point out of range");
  // Summing in index order matches the search's own arithmetic bit for bit.
  std::vector<std::size_t> sorted = seq;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t f = 0; f < F.size(); ++f)
    for (std::size_t g = f + 1; g < F.size(); ++g) {
      double sum = 0.0;
      for (std::size_t s : sorted) sum += (F.values[f][s] - F.values[g][s]).squaredNorm();
      if (sum <= e2 && (F.values[f][x] - F.values[g][x]).squaredNorm() > e2) return false;
    }
  return true;
}

namespace {

using Mask = std::uint64_t;

// Squared gaps for every unordered pair of distinct functions; (f, f)
// never witnesses independence.
struct PairGaps {
  std::size_t n = 0;
  std::vector<std::vector<double>> gap;  // gap[pair][x]

  explicit PairGaps(const FiniteClass& F) : n(F.domain_size()) {
    for (std::size_t f = 0; f < F.size(); ++f)
      for (std::size_t g = f + 1; g < F.size(); ++g) {
        std::vector<double> row(n);
        for (std::size_t x = 0; x < n; ++x) row[x] = (F.values[f][x] - F.values[g][x]).squaredNorm();
        gap.push_back(std::move(row));
      }
  }

  // Sums in increasing index order so candidate thresholds built the same
  // way compare bit-exactly.
  double masked_sum(std::size_t p, Mask s) const {
    double sum = 0.0;
    for (std::size_t x = 0; x < n; ++x)
      if (s >> x & 1u) sum += gap[p][x];
    return sum;
  }

  bool independent(std::size_t x, Mask s, double e2) const {
    for (std::size_t p = 0; p < gap.size(); ++p)
      if (gap[p][x] > e2 && masked_sum(p, s) <= e2) return true;
    return false;
  }

  bool covered(Mask s, double e2) const {
    for (std::size_t x = 0; x < n; ++x)
      if (independent(x, s, e2)) return false;
    return true;
  }
};

void check_domain(const FiniteClass& F, double eps) {
  validate(F);
  if (!(eps >= 0.0)) throw ContractError("eps must be >= 0");
  if (F.domain_size() > 63) throw ContractError("eluder search supports at most 63 domain points");
}

class LongestSearch {
 public:
  LongestSearch(const PairGaps& gaps, double e2, std::size_t& nodes, std::size_t cap)
      : gaps_(gaps), e2_(e2), nodes_(nodes), cap_(cap) {}

  std::size_t longest(Mask s) {
    if (auto it = memo_.find(s); it != memo_.end()) return it->second;
    if (++nodes_ > cap_) throw BudgetExceeded("eluder search node cap reached");
    std::size_t best = 0;
    for (std::size_t x = 0; x < gaps_.n; ++x) {
      if (s >> x & 1u) continue;
      if (gaps_.independent(x, s, e2_)) best = std::max(best, 1 + longest(s | Mask{1} << x));
      if (best + static_cast<std::size_t>(std::popcount(s)) == gaps_.n) break;
    }
    memo_.emplace(s, best);
    return best;
  }

  std::vector<std::size_t> witness() {
    std::vector<std::size_t> seq;
    Mask s = 0;
    std::size_t remaining = longest(0);
    while (remaining > 0) {
      for (std::size_t x = 0; x < gaps_.n; ++x) {
        if (s >> x & 1u || !gaps_.independent(x, s, e2_)) continue;
        const Mask next = s | Mask{1} << x;
        if (1 + longest(next) == remaining) {
          seq.push_back(x);
          s = next;
          --remaining;
          break;
        }
      }
    }
    return seq;
  }

 private:
  const PairGaps& gaps_;
  double e2_;
  std::size_t& nodes_;
  std::size_t cap_;
  std::unordered_map<Mask, std::size_t> memo_;
};

// Independence at level e2 only changes where e2 crosses a subset sum of
// some pair's squared gaps, and is constant on [c_i, c_{i+1}) between
// consecutive sums. Evaluating at eps^2 and every sum above it is exact.
std::vector<double> candidate_levels(const PairGaps& gaps, double e2, std::size_t& nodes, std::size_t cap) {
  double max_gap = 0.0;
  for (const auto& row : gaps.gap)
    for (double v : row) max_gap = std::max(max_gap, v);
  std::set<double> levels{e2};
  for (const auto& row : gaps.gap) {
    std::set<double> sums{0.0};
    for (std::size_t x = 0; x < gaps.n; ++x) {
      std::set<double> next = sums;
      for (double s : sums) {
        const double v = s + row[x];
        // Above the largest single gap no point can be independent.
        if (v < max_gap) next.insert(v);
      }
      sums.swap(next);
      nodes += sums.size();
      if (nodes > cap) throw BudgetExceeded("eluder threshold enumeration node cap reached");
    }
    for (double s : sums)
      if (s > e2) levels.insert(s);
  }
  return {levels.begin(), levels.end()};
}

}  // namespace

EluderCertificate eluder_dimension(const FiniteClass& F, double eps, const SearchOptions& opts) {
  check_domain(F, eps);
  EluderCertificate cert;
  cert.variant = EluderVariant::longest;
  cert.epsilon = eps;
  cert.epsilon_used = eps;
  cert.epsilon_used_sq = eps * eps;
  const PairGaps gaps(F);
  try {
    for (double level : candidate_levels(gaps, eps * eps, cert.nodes, opts.node_cap)) {
      LongestSearch search(gaps, level, cert.nodes, opts.node_cap);
      const std::size_t len = search.longest(0);
      if (len < cert.dim || (len == cert.dim && len == 0)) continue;
      std::vector<std::size_t> w = search.witness();
      if (len > cert.dim || w < cert.witness) {
        cert.dim = len;
        cert.witness = std::move(w);
        cert.epsilon_used = std::sqrt(level);
        cert.epsilon_used_sq = level;
      }
      if (cert.dim == gaps.n) break;
    }
  } catch (const BudgetExceeded&) {
    cert.status = SearchStatus::budget_exceeded;
  }
  return cert;
}

EluderCertificate shortest_cover_dimension(const FiniteClass& F, double eps, const SearchOptions& opts) {
  check_domain(F, eps);
  EluderCertificate cert;
  cert.variant = EluderVariant::shortest_cover;
  cert.epsilon = eps;
  cert.epsilon_used = eps;
  cert.epsilon_used_sq = eps * eps;
  const PairGaps gaps(F);
  const double e2 = eps * eps;
  const std::size_t n = gaps.n;
  for (std::size_t k = 0; k <= n; ++k) {
    // Subsets of size k in lexicographic order of their sorted elements.
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    while (true) {
      if (++cert.nodes > opts.node_cap) {
        cert.status = SearchStatus::budget_exceeded;
        cert.dim = k;  // lower bound: no smaller cover exists
        return cert;
      }
      Mask s = 0;
      for (std::size_t i : idx) s |= Mask{1} << i;
      if (gaps.covered(s, e2)) {
        cert.dim = k;
        cert.witness = idx;
        return cert;
      }
      std::size_t i = k;
      while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
      if (i == 0) break;
      ++idx[i - 1];
      for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  // eps = 0 with duplicate-free domains is always covered by the whole
  // domain, so this is unreachable for valid input.
  throw ContractError("shortest_cover_dimension: no cover found");
}

FiniteClass dual_class(const FiniteClass& F) {
  validate(F);
  FiniteClass D;
  for (std::size_t f = 0; f < F.size(); ++f) D.domain.push_back(F.name(f));
  D.function_names = F.domain;
  for (std::size_t x = 0; x < F.domain_size(); ++x) {
    std::vector<Vec> row;
    for (std::size_t f = 0; f < F.size(); ++f) row.push_back(F.values[f][x]);
    D.values.push_back(std::move(row));
  }
  return D;
}

namespace {

// inf over F of 1/2 ||f'(x1) - f(x1)||^2 + 1/2 ||f'(x1) - f(x2)||^2
double two_point_excess(const FiniteClass& F, std::size_t task, std::size_t x1, std::size_t x2) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& cand : F.values) {
    const double v = 0.5 * (cand[x1] - F.values[task][x1]).squaredNorm() +
                     0.5 * (cand[x1] - F.values[task][x2]).squaredNorm();
    best = std::min(best, v);
  }
  return best;
}

}  // namespace

AdversarialTask adversarial_task(const FiniteClass& F, const std::vector<std::size_t>& chosen, double eps) {
  validate(F);
  if (chosen.empty()) throw ContractError("adversarial_task: need at least one chosen task");
  if (!(eps >= 0.0)) throw ContractError("adversarial_task: eps must be >= 0");
  for (std::size_t c : chosen)
    if (c >= F.size()) throw ContractError("adversarial_task: chosen task out of range");
  const double e2 = eps * eps;
  const std::size_t n = F.domain_size();

  for (std::size_t next = 0; next < F.size(); ++next) {
    if (std::find(chosen.begin(), chosen.end(), next) != chosen.end()) continue;
    for (std::size_t x1 = 0; x1 < n; ++x1)
      for (std::size_t x2 = x1 + 1; x2 < n; ++x2) {
        double src = 0.0;
        for (std::size_t c : chosen) src += (F.values[c][x1] - F.values[c][x2]).squaredNorm();
        const double tgt = (F.values[next][x1] - F.values[next][x2]).squaredNorm();
        if (src > e2 || tgt <= e2) continue;

        AdversarialTask out;
        out.next_task = next;
        out.x1 = x1;
        out.x2 = x2;
        out.source_gap = src;
        out.target_gap = tgt;
        out.learned_distribution.assign(n, 0.0);
        out.learned_distribution[x1] = 1.0;
        out.true_distribution.assign(n, 0.0);
        out.true_distribution[x1] = 0.5;
        out.true_distribution[x2] = 0.5;
        double s = 0.0;
        for (std::size_t c : chosen) s += two_point_excess(F, c, x1, x2);
        out.source_excess = s / static_cast<double>(chosen.size());
        out.target_excess = two_point_excess(F, next, x1, x2);
        out.ratio = safe_ratio(out.target_excess, out.source_excess);
        return out;
      }
  }
  throw ContractError("adversarial_task: every remaining task is (F*, eps)-dependent on the chosen ones");
}

}  // namespace divlab
