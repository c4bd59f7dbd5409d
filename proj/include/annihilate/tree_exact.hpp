// Exact laws of the root-visit counts on the bidirected tree and the checks
// built on them: log-concavity, stochastic dominance, anticoncentration, the
// size-bias coupling bound and the two-sided growth of the means.

#ifndef ANNIHILATE_TREE_EXACT_HPP_
#define ANNIHILATE_TREE_EXACT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "annihilate/pmf.hpp"

namespace annihilate {

// Default per-step tail cut. Any cut mass is amplified up to d-fold per level
// by the d-fold convolution, so the cut has to sit far below the budget.
inline constexpr double kDefaultTailEps = 1e-200;
inline constexpr double kDefaultTailBudget = 1e-9;

class TailBudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SequenceKind { kW, kU };

struct RecursionSeries {
  SequenceKind kind = SequenceKind::kW;
  int d = 2;
  double p = 0.5;
  std::vector<Pmf> pmfs;
  std::vector<double> means;
  std::vector<double> zero_mass;

  std::size_t size() const { return pmfs.size(); }
  double dropped_tail() const { return pmfs.empty() ? 0.0 : pmfs.back().dropped_tail; }
};

namespace detail {

inline RecursionSeries iterate_A(SequenceKind kind, int d, double p, int n_max, double eps_step,
                                 double eps_total) {
  if (d < 2) throw std::invalid_argument("recursion: d must be at least 2");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("recursion: p outside [0,1]");
  if (n_max < 1) throw std::invalid_argument("recursion: n_max must be at least 1");
  RecursionSeries s;
  s.kind = kind;
  s.d = d;
  s.p = p;
  Pmf x = kind == SequenceKind::kW ? delta(0) : delta(1);
  for (int n = 0;; ++n) {
    s.means.push_back(x.mean());
    s.zero_mass.push_back(x.zero_mass());
    s.pmfs.push_back(x);
    if (n == n_max) break;
    const Pmf& base = kind == SequenceKind::kW ? x : condition_positive(x);
    Pmf next = apply_A(base, d, p, eps_step);
    if (next.dropped_tail > eps_total) {
      std::ostringstream msg;
      msg << "tail budget exceeded at n=" << n + 1 << ": dropped " << next.dropped_tail
          << " > " << eps_total << " (d=" << d << ", p=" << p << ", eps_step=" << eps_step << ")";
      throw TailBudgetExceeded(msg.str());
    }
    x = std::move(next);
  }
  return s;
}

}  // namespace detail

// W_0 = 0, W_{n+1} = A W_n.
inline RecursionSeries w_sequence(int d, double p, int n_max, double eps_step = kDefaultTailEps,
                                  double eps_total = kDefaultTailBudget) {
  return detail::iterate_A(SequenceKind::kW, d, p, n_max, eps_step, eps_total);
}

// U_0 = 1, U_{n+1} = A (U_n conditioned on being positive).
inline RecursionSeries u_sequence(int d, double p, int n_max, double eps_step = kDefaultTailEps,
                                  double eps_total = kDefaultTailBudget) {
  return detail::iterate_A(SequenceKind::kU, d, p, n_max, eps_step, eps_total);
}

struct InequalityReport {
  std::string check;
  int checked = 0;
  int violations = 0;
  std::string first_violation;
  // Smallest value of (right side - left side) seen, after tolerance.
  double worst_margin = std::numeric_limits<double>::infinity();

  bool ok() const { return violations == 0; }
  void record(bool holds, double margin, const std::string& where) {
    ++checked;
    worst_margin = std::min(worst_margin, margin);
    if (!holds) {
      if (violations == 0) first_violation = where;
      ++violations;
    }
  }
  void merge(const InequalityReport& o) {
    if (violations == 0 && o.violations > 0) first_violation = o.first_violation;
    checked += o.checked;
    violations += o.violations;
    worst_margin = std::min(worst_margin, o.worst_margin);
  }
};

inline std::string series_label(const RecursionSeries& s, std::size_t n) {
  std::ostringstream out;
  out << (s.kind == SequenceKind::kW ? "W" : "U") << "_" << n << " (d=" << s.d << ", p=" << s.p << ")";
  return out.str();
}

inline InequalityReport check_log_concavity(const RecursionSeries& s, double tol = 1e-9) {
  InequalityReport r;
  r.check = "log-concavity";
  for (std::size_t n = 0; n < s.size(); ++n) {
    const bool holds = is_log_concave(s.pmfs[n], tol);
    r.record(holds, holds ? 0.0 : -1.0, series_label(s, n));
  }
  return r;
}

// W_n <= U_n in the usual stochastic order, for every n.
inline InequalityReport check_dominance(const RecursionSeries& w, const RecursionSeries& u) {
  if (w.kind != SequenceKind::kW || u.kind != SequenceKind::kU || w.d != u.d || w.p != u.p)
    throw std::invalid_argument("check_dominance: needs matching W and U sequences");
  InequalityReport r;
  r.check = "W_n <=st U_n";
  const std::size_t n_max = std::min(w.size(), u.size());
  for (std::size_t n = 0; n < n_max; ++n) {
    StCheck c = st_compare(w.pmfs[n], u.pmfs[n]);
    const double tol = w.pmfs[n].dropped_tail + u.pmfs[n].dropped_tail + 1e-12;
    std::ostringstream where;
    where << "n=" << n << " k=" << c.worst_point << " gap=" << c.worst_gap;
    r.record(c.holds, tol - c.worst_gap, where.str());
  }
  return r;
}

// P(W_{n+1} = 0) >= 4^{-E W_n - 1}.
inline InequalityReport check_anticoncentration(const RecursionSeries& w) {
  if (w.kind != SequenceKind::kW) throw std::invalid_argument("check_anticoncentration: needs W");
  InequalityReport r;
  r.check = "P(W_{n+1}=0) >= 4^{-EW_n-1}";
  for (std::size_t n = 0; n + 1 < w.size(); ++n) {
    const double lhs = w.zero_mass[n + 1];
    const double rhs = std::pow(4.0, -w.means[n] - 1.0);
    const double tol = w.pmfs[n + 1].dropped_tail + 1e-12;
    std::ostringstream where;
    where << "n=" << n << " P=" << lhs << " bound=" << rhs;
    r.record(lhs + tol >= rhs, lhs + tol - rhs, where.str());
  }
  return r;
}

// prod_{i>=1} (1 - d^{-i})^2, summed until the factors stop changing.
inline double sb_coupling_q(int d = 2) {
  double q = 1.0;
  double x = 1.0;
  for (int i = 1; i < 2000; ++i) {
    x /= d;
    const double f = (1.0 - x) * (1.0 - x);
    if (f == 1.0) break;
    q *= f;
  }
  return q;
}

// Size-bias of U_n against 1 + sum_{i=1}^n Bin(2, d^{-i}) + U_n.
inline InequalityReport check_sb_coupling_bound(const RecursionSeries& u, std::size_t n) {
  if (u.kind != SequenceKind::kU) throw std::invalid_argument("check_sb_coupling_bound: needs U");
  if (n < 1 || n >= u.size()) throw std::invalid_argument("check_sb_coupling_bound: n out of range");
  Pmf bound = pmf_shift(u.pmfs[n], 1);
  double scale = 1.0;
  for (std::size_t i = 1; i <= n; ++i) {
    scale /= u.d;
    if (scale < 1e-300) break;
    bound = pmf_convolve(bound, binomial_pmf(2, scale));
  }
  const Pmf biased = size_bias(u.pmfs[n]);
  StCheck c = st_compare(biased, bound);
  const double tol = biased.dropped_tail + bound.dropped_tail + 1e-12;
  InequalityReport r;
  r.check = "U_n^s <=st 1 + sum Bin(2,d^-i) + U_n";
  std::ostringstream where;
  where << series_label(u, n) << " k=" << c.worst_point << " gap=" << c.worst_gap;
  r.record(c.holds, tol - c.worst_gap, where.str());
  return r;
}

// Lower: mu_{n+2} - mu_n >= 4^{-mu_n - 1} / 2 for W, checked only at p = 1/2.
// Upper: mu_{n+1} <= mu_n / (1 - exp(-q mu_n)) for U.
inline InequalityReport check_growth(const RecursionSeries& w, const RecursionSeries& u, double q) {
  InequalityReport r;
  r.check = "two-sided growth";
  const std::size_t lower_end = w.p == 0.5 ? w.size() : 0;
  for (std::size_t n = 0; n + 2 < lower_end; ++n) {
    const double gain = w.means[n + 2] - w.means[n];
    const double floor = 0.5 * std::pow(4.0, -w.means[n] - 1.0);
    const double tol = 1e-10 + w.pmfs[n + 2].dropped_tail;
    std::ostringstream where;
    where << "lower n=" << n << " gain=" << gain << " floor=" << floor;
    r.record(gain + tol >= floor, gain + tol - floor, where.str());
  }
  for (std::size_t n = 0; n + 1 < u.size(); ++n) {
    const double mu = u.means[n];
    const double cap = mu / -std::expm1(-q * mu);
    const double tol = 1e-10 + u.pmfs[n + 1].dropped_tail;
    std::ostringstream where;
    where << "upper n=" << n << " mu_next=" << u.means[n + 1] << " cap=" << cap;
    r.record(u.means[n + 1] <= cap + tol, cap + tol - u.means[n + 1], where.str());
  }
  return r;
}

// h(x) = (1 + x) log(1 + x) - x, with h(-1) = 1.
inline double bennett_h(double x) {
  if (x == -1.0) return 1.0;
  return (1.0 + x) * std::log1p(x) - x;
}

struct TailBound {
  double bennett = 1.0;
  double quadratic = 1.0;
  double best() const { return std::min(bennett, quadratic); }
};

// Lower-tail bound P(X - mu <= -x) for a size-bias coupling X^s <= X + c
// holding with probability at least pq.
inline TailBound concentration_lower_tail_bound(double mean, double c, double pq, double x) {
  if (!(mean > 0.0) || !(c > 0.0) || !(pq > 0.0 && pq <= 1.0))
    throw std::invalid_argument("concentration_lower_tail_bound: bad parameters");
  const double scale = pq * mean;
  if (!(x >= 0.0) || x > scale * (1.0 + 1e-15))
    throw std::invalid_argument("concentration_lower_tail_bound: x outside [0, pq*mean]");
  TailBound b;
  const double ratio = std::min(x / scale, 1.0);
  b.bennett = std::exp(-(scale / c) * bennett_h(-ratio));
  b.quadratic = std::exp(-x * x / (2.0 * pq * c * mean));
  return b;
}

struct UpperIterate {
  std::vector<double> mu;  // mu[0] = mu0
  double sup_ratio = 0.0;  // sup over n >= 2 of mu_n / log n
  std::size_t sup_at = 0;
};

// mu_{n+1} = mu_n / (1 - exp(-q mu_n)) - 2 eps.
inline UpperIterate recursion_upper_iterate(double q, double mu0, std::size_t n_max, double eps = 0.0,
                                            std::size_t ratio_from = 2) {
  if (!(q > 0.0) || !(mu0 > 0.0)) throw std::invalid_argument("recursion_upper_iterate: q, mu0 > 0");
  UpperIterate it;
  it.mu.reserve(n_max + 1);
  it.mu.push_back(mu0);
  for (std::size_t n = 0; n < n_max; ++n) {
    const double m = it.mu.back();
    it.mu.push_back(m / -std::expm1(-q * m) - 2.0 * eps);
  }
  for (std::size_t n = std::max<std::size_t>(ratio_from, 2); n <= n_max; ++n) {
    const double r = it.mu[n] / std::log(static_cast<double>(n));
    if (r > it.sup_ratio) {
      it.sup_ratio = r;
      it.sup_at = n;
    }
  }
  return it;
}

// The unique x > 0 with x / (1 - exp(-q x)) - 2 eps = x, by bisection.
inline double subcritical_fixed_point(double q, double eps) {
  if (!(q > 0.0) || !(eps > 0.0 && eps < 0.5))
    throw std::invalid_argument("subcritical_fixed_point: need q > 0 and 0 < eps < 1/2");
  // g(x) = x / (exp(q x) - 1) decreases from 1/q to 0.
  auto g = [q](double x) { return x / std::expm1(q * x); };
  const double target = 2.0 * eps;
  if (target >= 1.0 / q) throw std::domain_error("subcritical_fixed_point: no root, 2 eps >= 1/q");
  double lo = 1e-300, hi = 1.0;
  while (g(hi) > target) {
    hi *= 2.0;
    if (hi > 1e300) throw std::domain_error("subcritical_fixed_point: bracket failure");
  }
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct SubcriticalLimit {
  double mean = 0.0;
  double zero_mass = 0.0;
  int iterations = 0;
  double last_increment = 0.0;
};

// Iterates W_n until the mean moves by less than tol. No explicit tail cut:
// only products below the underflow floor are discarded.
inline SubcriticalLimit subcritical_limit(int d, double p, double tol = 1e-12,
                                          int max_iterations = 200000) {
  if (!(p < 0.5)) throw std::invalid_argument("subcritical_limit: needs p < 1/2");
  Pmf x = delta(0);
  double prev = 0.0;
  SubcriticalLimit out;
  for (int n = 1; n <= max_iterations; ++n) {
    x = apply_A(x, d, p, 0.0);
    const double m = x.mean();
    out.last_increment = m - prev;
    prev = m;
    out.iterations = n;
    if (std::fabs(out.last_increment) < tol) break;
  }
  if (std::fabs(out.last_increment) >= tol)
    throw std::runtime_error("subcritical_limit: did not converge");
  out.mean = prev;
  out.zero_mass = x.zero_mass();
  return out;
}

}  // namespace annihilate

#endif  // ANNIHILATE_TREE_EXACT_HPP_
