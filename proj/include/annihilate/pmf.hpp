// Probability mass functions on the nonnegative integers.
//
// A Pmf stores masses 0..K plus the mass that was cut off beyond K. Operations
// keep sum(mass) + dropped_tail equal to 1; dropped mass is never put back.

#ifndef ANNIHILATE_PMF_HPP_
#define ANNIHILATE_PMF_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace annihilate {

// Products below this are treated as zero. Keeps the kernels out of subnormals.
inline constexpr double kPmfUnderflow = 1e-300;

// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double v) {
    double t = sum_ + v;
    if (std::fabs(sum_) >= std::fabs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct Pmf {
  std::vector<double> mass{1.0};
  double dropped_tail = 0.0;

  std::size_t support_bound_used() const { return mass.empty() ? 0 : mass.size() - 1; }
  double at(std::int64_t k) const {
    return k < 0 || k >= static_cast<std::int64_t>(mass.size()) ? 0.0 : mass[k];
  }
  double total() const {
    CompensatedSum s;
    for (double m : mass) s.add(m);
    return s.value();
  }
  double mean() const {
    CompensatedSum s;
    for (std::size_t k = 1; k < mass.size(); ++k) s.add(static_cast<double>(k) * mass[k]);
    return s.value();
  }
  double zero_mass() const { return at(0); }
  // P(X <= k) over the stored part.
  std::vector<double> cdf() const {
    std::vector<double> out(mass.size());
    CompensatedSum s;
    for (std::size_t k = 0; k < mass.size(); ++k) {
      s.add(mass[k]);
      out[k] = s.value();
    }
    return out;
  }
  // Drops trailing exact zeros.
  void compact() {
    while (mass.size() > 1 && mass.back() == 0.0) mass.pop_back();
  }
};

inline Pmf delta(std::size_t k) {
  Pmf x;
  x.mass.assign(k + 1, 0.0);
  x.mass[k] = 1.0;
  return x;
}

inline Pmf pmf_from(std::vector<double> mass, double dropped_tail = 0.0) {
  if (mass.empty()) throw std::invalid_argument("pmf_from: empty mass vector");
  for (double m : mass)
    if (!(m >= 0.0) || !std::isfinite(m))
      throw std::invalid_argument("pmf_from: masses must be finite and nonnegative");
  Pmf x;
  x.mass = std::move(mass);
  x.dropped_tail = dropped_tail;
  return x;
}

inline double log_choose(std::int64_t n, std::int64_t k) {
  return std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
         std::lgamma(static_cast<double>(n - k) + 1);
}

// Bin(n, q) as a Pmf.
inline Pmf binomial_pmf(std::int64_t n, double q) {
  if (n < 0 || !(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("binomial_pmf: bad arguments");
  Pmf x;
  x.mass.assign(n + 1, 0.0);
  if (q == 0.0) {
    x.mass[0] = 1.0;
    return x;
  }
  if (q == 1.0) {
    x.mass[n] = 1.0;
    return x;
  }
  const double lq = std::log(q), lr = std::log1p(-q);
  for (std::int64_t k = 0; k <= n; ++k)
    x.mass[k] = std::exp(log_choose(n, k) + k * lq + (n - k) * lr);
  return x;
}

// Law of (X + Y)^+ with P(Y = 1) = p, P(Y = -1) = 1 - p.
inline Pmf pmf_step_plus(const Pmf& x, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("pmf_step_plus: p outside [0,1]");
  const std::size_t n = x.mass.size();
  Pmf y;
  y.dropped_tail = x.dropped_tail;
  y.mass.assign(n + 1, 0.0);
  const double r = 1.0 - p;
  y.mass[0] = r * (x.at(0) + x.at(1));
  for (std::size_t k = 1; k <= n; ++k)
    y.mass[k] = p * x.at(static_cast<std::int64_t>(k) - 1) + r * x.at(static_cast<std::int64_t>(k) + 1);
  y.compact();
  return y;
}

// Law of Bin(X, q).
inline Pmf pmf_thin(const Pmf& x, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("pmf_thin: q outside [0,1]");
  Pmf y;
  y.dropped_tail = x.dropped_tail;
  const std::size_t n = x.mass.size();
  if (q == 1.0) {
    y.mass = x.mass;
    return y;
  }
  if (q == 0.0) {
    y.mass = {x.total()};
    return y;
  }
  const double lq = std::log(q), lr = std::log1p(-q);
  std::vector<double> lf(n + 1);
  for (std::size_t i = 0; i <= n; ++i) lf[i] = std::lgamma(static_cast<double>(i) + 1);
  std::vector<CompensatedSum> acc(n);
  const double floor_log = std::log(kPmfUnderflow);
  for (std::size_t m = 0; m < n; ++m) {
    const double w = x.mass[m];
    if (w <= 0.0) continue;
    const double lw = std::log(w) + lf[m];
    for (std::size_t k = 0; k <= m; ++k) {
      const double e = lw - lf[k] - lf[m - k] + k * lq + (m - k) * lr;
      if (e < floor_log) continue;
      acc[k].add(std::exp(e));
    }
  }
  y.mass.resize(n);
  for (std::size_t k = 0; k < n; ++k) y.mass[k] = acc[k].value();
  y.compact();
  return y;
}

namespace detail {

// Index ranges of y holding entries >= threshold, via running maxima.
struct MaxProfile {
  std::vector<double> prefix, suffix;
  explicit MaxProfile(const std::vector<double>& y) : prefix(y.size()), suffix(y.size()) {
    double m = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) prefix[i] = m = std::max(m, y[i]);
    m = 0.0;
    for (std::size_t i = y.size(); i-- > 0;) suffix[i] = m = std::max(m, y[i]);
  }
  // [lo, hi) outside of which every entry is below threshold.
  std::pair<std::size_t, std::size_t> range(double threshold) const {
    auto lo = std::lower_bound(prefix.begin(), prefix.end(), threshold) - prefix.begin();
    auto hi = std::lower_bound(suffix.rbegin(), suffix.rend(), threshold) - suffix.rbegin();
    return {static_cast<std::size_t>(lo), suffix.size() - static_cast<std::size_t>(hi)};
  }
};

inline double combine_dropped(double a, double b) {
  // 1 - (1 - a)(1 - b)
  return a + b - a * b;
}

}  // namespace detail

// Law of X + Y for independent X, Y. The result is rescaled so that its mass
// equals 1 - dropped_tail exactly; this removes rounding drift, which repeated
// convolution would otherwise amplify geometrically.
inline Pmf pmf_convolve(const Pmf& x, const Pmf& y) {
  const std::size_t nx = x.mass.size(), ny = y.mass.size();
  std::vector<double> sum(nx + ny - 1, 0.0), comp(nx + ny - 1, 0.0);
  detail::MaxProfile prof(y.mass);
  for (std::size_t i = 0; i < nx; ++i) {
    const double a = x.mass[i];
    if (a <= 0.0) continue;
    auto [lo, hi] = prof.range(kPmfUnderflow / a);
    double* s = sum.data() + i;
    double* c = comp.data() + i;
    for (std::size_t j = lo; j < hi; ++j) {
      const double v = a * y.mass[j];
      const double t = s[j] + v;
      const double bp = t - s[j];
      c[j] += (s[j] - (t - bp)) + (v - bp);
      s[j] = t;
    }
  }
  Pmf out;
  out.mass.resize(sum.size());
  for (std::size_t k = 0; k < sum.size(); ++k) out.mass[k] = sum[k] + comp[k];
  out.dropped_tail = detail::combine_dropped(x.dropped_tail, y.dropped_tail);
  const double target = 1.0 - out.dropped_tail;
  const double have = out.total();
  if (have > 0.0 && target > 0.0) {
    const double f = target / have;
    for (double& m : out.mass) m *= f;
  }
  out.compact();
  return out;
}

inline Pmf pmf_convolve_power(const Pmf& x, int d) {
  if (d < 1) throw std::invalid_argument("pmf_convolve_power: d must be positive");
  Pmf result;
  bool have = false;
  Pmf base = x;
  for (int e = d;;) {
    if (e & 1) {
      result = have ? pmf_convolve(result, base) : base;
      have = true;
    }
    e >>= 1;
    if (!e) break;
    base = pmf_convolve(base, base);
  }
  return result;
}

// Law of X + s. A negative shift requires no mass below -s.
inline Pmf pmf_shift(const Pmf& x, std::int64_t s) {
  Pmf y;
  y.dropped_tail = x.dropped_tail;
  if (s >= 0) {
    y.mass.assign(s, 0.0);
    y.mass.insert(y.mass.end(), x.mass.begin(), x.mass.end());
    return y;
  }
  const std::size_t drop = static_cast<std::size_t>(-s);
  for (std::size_t k = 0; k < std::min(drop, x.mass.size()); ++k)
    if (x.mass[k] != 0.0) throw std::invalid_argument("pmf_shift: mass would become negative");
  if (drop >= x.mass.size()) {
    y.mass = {0.0};
    return y;
  }
  y.mass.assign(x.mass.begin() + drop, x.mass.end());
  return y;
}

// Cuts the upper tail once the remaining mass is below eps; the cut mass is
// added to dropped_tail.
inline Pmf pmf_trim(Pmf x, double eps) {
  if (eps <= 0.0) {
    x.compact();
    return x;
  }
  CompensatedSum tail;
  std::size_t k = x.mass.size();
  while (k > 1) {
    CompensatedSum next = tail;
    next.add(x.mass[k - 1]);
    if (next.value() >= eps) break;
    tail = next;
    --k;
  }
  x.mass.resize(k);
  x.dropped_tail += tail.value();
  x.compact();
  return x;
}

// The recursion operator: sum over d branches of Bin((X_i + Y_i)^+, 1/d).
inline Pmf apply_A(const Pmf& x, int d, double p, double eps_step = 0.0) {
  if (d < 2) throw std::invalid_argument("apply_A: d must be at least 2");
  Pmf branch = pmf_thin(pmf_step_plus(x, p), 1.0 / d);
  return pmf_trim(pmf_convolve_power(branch, d), eps_step);
}

inline Pmf condition_positive(const Pmf& x) {
  const double z = x.at(0);
  const double rest = x.total() - z;
  if (!(rest > 0.0)) throw std::invalid_argument("condition_positive: no mass above zero");
  const double keep = 1.0 - z;
  Pmf y = x;
  y.mass[0] = 0.0;
  for (double& m : y.mass) m /= keep;
  y.dropped_tail = x.dropped_tail / keep;
  return y;
}

inline Pmf size_bias(const Pmf& x) {
  const double mu = x.mean();
  if (!(mu > 0.0)) throw std::invalid_argument("size_bias: mean must be positive");
  Pmf y;
  y.mass.resize(x.mass.size());
  y.mass[0] = 0.0;
  for (std::size_t k = 1; k < x.mass.size(); ++k) y.mass[k] = static_cast<double>(k) * x.mass[k] / mu;
  y.dropped_tail = x.dropped_tail;
  return y;
}

// P_k^2 >= P_{k-1} P_{k+1} and no internal zeros. Masses below floor count as zero.
inline bool is_log_concave(const Pmf& x, double tol = 1e-12, double floor = 1e-15) {
  std::size_t lo = x.mass.size(), hi = 0;
  for (std::size_t k = 0; k < x.mass.size(); ++k)
    if (x.mass[k] >= floor) {
      lo = std::min(lo, k);
      hi = k;
    }
  if (lo > hi) return true;
  for (std::size_t k = lo; k <= hi; ++k)
    if (x.mass[k] < floor) return false;
  for (std::size_t k = lo + 1; k < hi; ++k)
    if (x.mass[k] * x.mass[k] < x.mass[k - 1] * x.mass[k + 1] * (1.0 - tol)) return false;
  return true;
}

// y(k)/x(k) nondecreasing over the union of the supports (x <= y in lr order).
inline bool lr_dominates(const Pmf& x, const Pmf& y, double tol = 1e-12, double floor = 0.0) {
  const std::size_t n = std::max(x.mass.size(), y.mass.size());
  auto xa = [&](std::size_t k) { double v = x.at(k); return v <= floor ? 0.0 : v; };
  auto ya = [&](std::size_t k) { double v = y.at(k); return v <= floor ? 0.0 : v; };
  bool have_prev = false;
  double px = 0.0, py = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double cx = xa(k), cy = ya(k);
    if (cx == 0.0 && cy == 0.0) continue;
    if (have_prev && cy * px < py * cx * (1.0 - tol)) return false;
    px = cx;
    py = cy;
    have_prev = true;
  }
  return true;
}

// CDF of x >= CDF of y everywhere (x <= y in the usual stochastic order), up
// to the summed dropped tails plus slack.
struct StCheck {
  bool holds = true;
  std::int64_t worst_point = -1;
  double worst_gap = 0.0;  // max of F_y(k) - F_x(k)
};

inline StCheck st_compare(const Pmf& x, const Pmf& y, double slack = 1e-12) {
  const std::size_t n = std::max(x.mass.size(), y.mass.size());
  CompensatedSum fx, fy;
  StCheck r;
  r.worst_gap = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    fx.add(x.at(k));
    fy.add(y.at(k));
    const double gap = fy.value() - fx.value();
    if (gap > r.worst_gap) {
      r.worst_gap = gap;
      r.worst_point = static_cast<std::int64_t>(k);
    }
  }
  r.holds = r.worst_gap <= x.dropped_tail + y.dropped_tail + slack;
  return r;
}

inline bool st_dominates(const Pmf& x, const Pmf& y, double slack = 1e-12) {
  return st_compare(x, y, slack).holds;
}

}  // namespace annihilate

#endif  // ANNIHILATE_PMF_HPP_
