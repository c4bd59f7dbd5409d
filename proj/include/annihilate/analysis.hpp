// Closed-form discrepancy and occupation formulas on the line, random-walk
// bound evaluators with Monte Carlo companions, and least-squares fits.

#ifndef ANNIHILATE_ANALYSIS_HPP_
#define ANNIHILATE_ANALYSIS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <random>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "annihilate/pmf.hpp"
#include "annihilate/random.hpp"

namespace annihilate {

// Welford accumulator for mean and standard error.
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }
  std::int64_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stderr_() const { return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

 private:
  std::int64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// A law on the integers: mass[i] is P(X = offset + i).
struct IntPmf {
  std::int64_t offset = 0;
  std::vector<double> mass;

  double at(std::int64_t v) const {
    const std::int64_t i = v - offset;
    return i < 0 || i >= static_cast<std::int64_t>(mass.size()) ? 0.0 : mass[i];
  }
  std::int64_t min_value() const { return offset; }
  std::int64_t max_value() const { return offset + static_cast<std::int64_t>(mass.size()) - 1; }
  double mean() const {
    CompensatedSum s;
    for (std::size_t i = 0; i < mass.size(); ++i)
      s.add(static_cast<double>(offset + static_cast<std::int64_t>(i)) * mass[i]);
    return s.value();
  }
};

// D over k sites: 2 Bin(k, p) - k. k = 0 gives D = 0.
inline IntPmf discrepancy_pmf(std::int64_t k, double p) {
  if (k < 0) throw std::invalid_argument("discrepancy_pmf: k must be nonnegative");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("discrepancy_pmf: p outside [0,1]");
  const Pmf b = binomial_pmf(k, p);
  IntPmf d;
  d.offset = -k;
  d.mass.assign(2 * k + 1, 0.0);
  for (std::int64_t j = 0; j <= k; ++j) d.mass[2 * j] = b.mass[j];
  return d;
}

namespace detail {

// E[f(D) 1{D >= 0}] for D = 2 Bin(k, p) - k. For p < 1/2 the binomial terms
// decrease past k/2, so the sum stops once they no longer register.
template <class F>
double nonnegative_part(std::int64_t k, double p, F f) {
  if (k < 0) throw std::invalid_argument("discrepancy: k must be nonnegative");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("discrepancy: p outside [0,1]");
  if (k == 0) return f(0);
  if (p == 0.0) return 0.0;
  if (p == 1.0) return f(k);
  const std::int64_t m = (k + 1) / 2;
  const double lq = std::log(p), lr = std::log1p(-p);
  const double odds = p / (1.0 - p);
  double term = std::exp(log_choose(k, m) + m * lq + (k - m) * lr);
  CompensatedSum s;
  for (std::int64_t j = m; j <= k; ++j) {
    const double w = f(2 * j - k);
    s.add(w * term);
    if (p < 0.5 && term * w < 1e-18 * std::fabs(s.value())) break;
    term *= odds * static_cast<double>(k - j) / static_cast<double>(j + 1);
  }
  return s.value();
}

}  // namespace detail

// E[1{D >= 0} D] for D over k sites.
inline double positive_part_mean(std::int64_t k, double p) {
  return detail::nonnegative_part(k, p, [](std::int64_t v) { return static_cast<double>(v); });
}

// E[1{D >= 0}(1 + D)] for D over k sites.
inline double nonnegative_weight(std::int64_t k, double p) {
  return detail::nonnegative_part(k, p, [](std::int64_t v) { return 1.0 + static_cast<double>(v); });
}

// (1 - 2p)^{-2} k^{-1/2} (2 sqrt(p(1-p)))^k.
inline double positive_part_envelope(std::int64_t k, double p) {
  if (k < 1 || !(p > 0.0 && p < 0.5)) throw std::invalid_argument("positive_part_envelope: bad arguments");
  const double e = 1.0 - 2.0 * p;
  return std::pow(e, -2.0) / std::sqrt(static_cast<double>(k)) *
         std::pow(2.0 * std::sqrt(p * (1.0 - p)), static_cast<double>(k));
}

// Expected root occupation of the particle released from site k in the
// one-sided sequential process: 2p/(1-p) E[1{D >= 0}(1 + D)], D over k sites.
inline double expected_Uk(std::int64_t k, double p) {
  if (k < 0) throw std::invalid_argument("expected_Uk: k must be nonnegative");
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("expected_Uk: p outside [0,1)");
  return 2.0 * p / (1.0 - p) * nonnegative_weight(k, p);
}

struct UplusSum {
  double p = 0.0;
  double value = 0.0;          // sum over k >= 0
  double value_from_one = 0.0; // sum over k >= 1
  double tail_bound = 0.0;     // certified bound on the omitted k > k_cap terms
  std::int64_t k_cap = 0;
  double scaled = 0.0;         // (1 - 2p)^3 * value
};

// Sum of expected_Uk. The omitted tail uses E[(1+D) 1{D>=0}] <= max(1, 1/theta) a^k
// with theta = log sqrt((1-p)/p) and a = 2 sqrt(p(1-p)).
inline UplusSum expected_Uplus(double p, std::int64_t k_cap = 0) {
  if (!(p > 0.25 && p < 0.5)) throw std::invalid_argument("expected_Uplus: needs 1/4 < p < 1/2");
  const double a = 2.0 * std::sqrt(p * (1.0 - p));
  const double theta = 0.5 * std::log((1.0 - p) / p);
  if (k_cap <= 0) k_cap = static_cast<std::int64_t>(std::ceil(std::log(1e-14) / std::log(a)));
  UplusSum out;
  out.p = p;
  out.k_cap = k_cap;
  CompensatedSum s;
  for (std::int64_t k = 0; k <= k_cap; ++k) s.add(expected_Uk(k, p));
  out.value = s.value();
  out.value_from_one = out.value - expected_Uk(0, p);
  out.tail_bound = 2.0 * p / (1.0 - p) * std::max(1.0, 1.0 / theta) *
                   std::pow(a, static_cast<double>(k_cap + 1)) / (1.0 - a);
  out.scaled = std::pow(1.0 - 2.0 * p, 3.0) * out.value;
  return out;
}

struct DevrResult {
  double probability = 0.0;
  std::int64_t sites = 0;
  double threshold = 0.0;
  bool exact = true;            // false when the normal approximation was used
  bool hypothesis_holds = false; // r <= (c1 / (1 - 2p))^{2/d}
};

// P(D(B_r) >= c1 r^{d/2}) with D = 2 Bin(N, p) - N and N = (2r+1)^d.
inline DevrResult devr_tail(std::int64_t r, int d, double p, double c1) {
  if (r < 1 || d < 1 || !(p > 0.0 && p < 1.0) || !(c1 > 0.0))
    throw std::invalid_argument("devr_tail: bad arguments");
  DevrResult out;
  const double side = 2.0 * static_cast<double>(r) + 1.0;
  const double n_real = std::pow(side, d);
  if (n_real > 9e15) throw std::overflow_error("devr_tail: site count too large");
  const std::int64_t n = static_cast<std::int64_t>(std::llround(n_real));
  out.sites = n;
  out.threshold = c1 * std::pow(static_cast<double>(r), 0.5 * d);
  out.hypothesis_holds = p < 0.5 && static_cast<double>(r) <= std::pow(c1 / (1.0 - 2.0 * p), 2.0 / d);
  // D >= threshold  <=>  Bin >= (n + threshold) / 2
  const std::int64_t j0 = static_cast<std::int64_t>(std::ceil((static_cast<double>(n) + out.threshold) / 2.0 - 1e-12));
  if (n <= 10'000'000) {
    const double lq = std::log(p), lr = std::log1p(-p);
    // Log-sum-exp over j >= j0.
    double peak = -std::numeric_limits<double>::infinity();
    std::vector<double> logs;
    logs.reserve(static_cast<std::size_t>(std::max<std::int64_t>(0, n - j0 + 1)));
    for (std::int64_t j = std::max<std::int64_t>(j0, 0); j <= n; ++j) {
      const double l = log_choose(n, j) + j * lq + (n - j) * lr;
      logs.push_back(l);
      peak = std::max(peak, l);
    }
    CompensatedSum s;
    for (double l : logs) s.add(std::exp(l - peak));
    out.probability = logs.empty() ? 0.0 : std::min(1.0, std::exp(peak) * s.value());
  } else {
    out.exact = false;
    const double mu = n * p, sd = std::sqrt(n * p * (1.0 - p));
    out.probability = 0.5 * std::erfc((static_cast<double>(j0) - 0.5 - mu) / (sd * std::sqrt(2.0)));
  }
  return out;
}

// P(T_x < T_{-a}) for simple random walk from 0.
inline double gr_prob(std::int64_t a, std::int64_t x) {
  if (a <= 0 || x <= 0) throw std::invalid_argument("gr_prob: a and x must be positive");
  return static_cast<double>(a) / static_cast<double>(a + x);
}

// Bound on P(T_x < T_{-a}, T_x <= t), valid for 3 sqrt(t) <= x <= 2t.
inline double gr_time_bound(std::int64_t a, std::int64_t x, double t) {
  if (a <= 0 || x <= 0 || !(t > 0.0)) throw std::invalid_argument("gr_time_bound: bad arguments");
  const double xf = static_cast<double>(x);
  if (xf < 3.0 * std::sqrt(t) || xf > 2.0 * t)
    throw std::domain_error("gr_time_bound: needs 3 sqrt(t) <= x <= 2t");
  return 2.0 * static_cast<double>(a) / static_cast<double>(a + x) * std::exp(-xf * xf / (12.0 * t));
}

// P(M_t >= x + 2 eps t) <= exp(-x^2 / 4t) for 0 <= x <= 2t.
inline double srw_max_bound(double x, double t) {
  if (!(t > 0.0) || x < 0.0 || x > 2.0 * t) throw std::domain_error("srw_max_bound: needs 0 <= x <= 2t");
  return std::exp(-x * x / (4.0 * t));
}

// P(M_t >= t + k) <= exp(-k^2 / (2(t + k))) for k >= 1.
inline double poisson_tail_bound(double k, double t) {
  if (!(t > 0.0) || k < 1.0) throw std::domain_error("poisson_tail_bound: needs t > 0, k >= 1");
  return std::exp(-k * k / (2.0 * (t + k)));
}

// E L_t <= sqrt(t).
inline double local_time_bound(double t) {
  if (!(t > 0.0)) throw std::domain_error("local_time_bound: needs t > 0");
  return std::sqrt(t);
}

// C k^{-1/2} exp(-k^2 / 12t) for 1 <= k <= 2t.
inline double seq_hit_bound(double k, double t, double C = 1.0) {
  if (!(t > 0.0) || k < 1.0 || k > 2.0 * t) throw std::domain_error("seq_hit_bound: needs 1 <= k <= 2t");
  return C / std::sqrt(k) * std::exp(-k * k / (12.0 * t));
}

struct RwBounds {
  double t = 0.0;
  double local_time = 0.0;
  double srw(double x) const { return srw_max_bound(x, t); }
  double poisson(double k) const { return poisson_tail_bound(k, t); }
  double seq(double k, double C = 1.0) const { return seq_hit_bound(k, t, C); }
};

inline RwBounds rw_bounds(double t) {
  if (!(t > 0.0)) throw std::domain_error("rw_bounds: needs t > 0");
  return RwBounds{t, local_time_bound(t)};
}

// Monte Carlo companions. All walks are rate-1 continuous-time nearest-neighbor
// walks on the integers started at 0; eps is the drift (P(+1) = (1 + eps)/2).

// Running maximum up to time t.
inline std::int64_t walk_max(Rng& rng, double t, double eps = 0.0) {
  std::int64_t s = 0, m = 0;
  double clock = rng.exponential(1.0);
  const double up = 0.5 * (1.0 + eps);
  while (clock <= t) {
    s += rng.uniform() < up ? 1 : -1;
    m = std::max(m, s);
    clock += rng.exponential(1.0);
  }
  return m;
}

// Time spent at 0 up to time t.
inline double walk_local_time(Rng& rng, double t) {
  std::int64_t s = 0;
  double clock = 0.0, at_origin = 0.0;
  for (;;) {
    const double next = clock + rng.exponential(1.0);
    if (s == 0) at_origin += std::min(next, t) - clock;
    if (next > t) break;
    clock = next;
    s += rng.bernoulli(0.5) ? 1 : -1;
  }
  return at_origin;
}

struct RuinOutcome {
  bool hit_x_first = false;
  double time = 0.0;  // time of the absorbing hit
};

// Runs until the walk hits x or -a.
inline RuinOutcome walk_ruin(Rng& rng, std::int64_t a, std::int64_t x) {
  std::int64_t s = 0;
  double clock = 0.0;
  for (;;) {
    clock += rng.exponential(1.0);
    s += rng.bernoulli(0.5) ? 1 : -1;
    if (s == x) return {true, clock};
    if (s == -a) return {false, clock};
  }
}

// Number of distinct walkers visiting 0 by time t, one independent walker per
// site of [-radius, radius].
inline std::int64_t distinct_visitors(Rng& rng, double t, std::int64_t radius) {
  std::int64_t count = 0;
  for (std::int64_t y = -radius; y <= radius; ++y) {
    if (y == 0) {
      ++count;
      continue;
    }
    std::int64_t s = y;
    for (double clock = rng.exponential(1.0); clock <= t; clock += rng.exponential(1.0)) {
      s += rng.bernoulli(0.5) ? 1 : -1;
      if (s == 0) {
        ++count;
        break;
      }
    }
  }
  return count;
}

struct HalfLineSample {
  double total = 0.0;               // sum of root occupations
  std::vector<double> per_site;     // occupation of the particle from site k
  std::int64_t lazy_b = 0;          // B-particles generated beyond k_max
};

// Infinite-horizon sequential process with stationary B-particles, releasing
// the A-particles of sites 0..k_max in order; every site beyond k_max carries
// a particle too, but only its B-particles matter. Each walk is resolved by
// gambler's ruin between the nearest surviving B-particles instead of being
// simulated step by step. per_site is filled for k < record.
inline HalfLineSample sample_halfline_uplus(double p, std::int64_t k_max, Rng& rng,
                                            std::int64_t record = 0) {
  if (!(p >= 0.0 && p < 0.5)) throw std::invalid_argument("sample_halfline_uplus: needs p < 1/2");
  if (k_max < 0) throw std::invalid_argument("sample_halfline_uplus: negative k_max");
  HalfLineSample out;
  out.per_site.assign(static_cast<std::size_t>(std::max<std::int64_t>(record, 0)), 0.0);
  std::vector<char> is_a(static_cast<std::size_t>(k_max + 1));
  std::set<std::int64_t> b;
  for (std::int64_t k = 0; k <= k_max; ++k) {
    is_a[k] = rng.bernoulli(p);
    if (!is_a[k]) b.insert(k);
  }
  std::int64_t frontier = k_max;
  auto next_b = [&](std::int64_t x) {
    auto it = b.upper_bound(x);
    if (it != b.end()) return *it;
    for (;;) {
      ++frontier;
      if (!rng.bernoulli(p)) {
        ++out.lazy_b;
        b.insert(frontier);
        return frontier;
      }
    }
  };
  for (std::int64_t k = 0; k <= k_max; ++k) {
    if (!is_a[k]) continue;
    const std::int64_t r = next_b(k);
    const auto it = b.lower_bound(k);
    double u = 0.0;
    if (it == b.begin()) {
      // Nothing to the left: the walk ends on r, visiting 0 first with
      // probability (r-k)/r; each visit escapes to r with probability 1/(2r).
      if (k == 0 || rng.uniform() < static_cast<double>(r - k) / static_cast<double>(r)) {
        std::geometric_distribution<std::int64_t> visits(0.5 / static_cast<double>(r));
        std::gamma_distribution<double> time(static_cast<double>(1 + visits(rng)), 1.0);
        u = time(rng);
      }
      b.erase(r);
    } else {
      const std::int64_t l = *std::prev(it);
      if (rng.uniform() < static_cast<double>(r - k) / static_cast<double>(r - l))
        b.erase(l);
      else
        b.erase(r);
    }
    out.total += u;
    if (k < record) out.per_site[k] = u;
  }
  return out;
}

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_ = 0.0;
  double r_squared = 0.0;
  double x_min = 0.0;
  double x_max = 0.0;
  std::size_t points = 0;
};

// Ordinary least squares of y on x.
inline FitResult fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("fit: length mismatch");
  const std::size_t n = x.size();
  if (n < 4) throw std::invalid_argument("fit: needs at least 4 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit: x values must not all coincide");
  FitResult f;
  f.points = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - f.intercept - f.slope * x[i];
    sse += e * e;
  }
  f.stderr_ = std::sqrt(std::max(0.0, sse / static_cast<double>(n - 2) / sxx));
  f.r_squared = syy > 0.0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
  f.x_min = *std::min_element(x.begin(), x.end());
  f.x_max = *std::max_element(x.begin(), x.end());
  return f;
}

// log value = slope * log t + intercept.
inline FitResult fit_power(const std::vector<std::pair<double, double>>& series) {
  std::vector<double> x, y;
  for (auto [t, v] : series) {
    if (!(t > 0.0) || !(v > 0.0)) throw std::invalid_argument("fit_power: values must be positive");
    x.push_back(std::log(t));
    y.push_back(std::log(v));
  }
  FitResult f = fit_linear(x, y);
  f.x_min = std::exp(f.x_min);
  f.x_max = std::exp(f.x_max);
  return f;
}

// value = slope * log n + intercept.
inline FitResult fit_log(const std::vector<std::pair<double, double>>& series) {
  std::vector<double> x, y;
  for (auto [n, v] : series) {
    if (!(n > 0.0) || !(v > 0.0)) throw std::invalid_argument("fit_log: values must be positive");
    x.push_back(std::log(n));
    y.push_back(v);
  }
  FitResult f = fit_linear(x, y);
  f.x_min = std::exp(f.x_min);
  f.x_max = std::exp(f.x_max);
  return f;
}

}  // namespace annihilate

#endif  // ANNIHILATE_ANALYSIS_HPP_
