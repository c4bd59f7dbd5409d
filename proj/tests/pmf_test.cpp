#include <gtest/gtest.h>

#include <cmath>

#include "annihilate/pmf.hpp"
#include "annihilate/random.hpp"

using namespace annihilate;

namespace {

void expect_mass(const Pmf& x, const std::vector<double>& want, double tol = 1e-15) {
  const std::size_t n = std::max(x.mass.size(), want.size());
  for (std::size_t k = 0; k < n; ++k)
    EXPECT_NEAR(x.at(static_cast<std::int64_t>(k)), k < want.size() ? want[k] : 0.0, tol) << "k=" << k;
}

void expect_same(const Pmf& x, const Pmf& y, double tol) {
  const std::size_t n = std::max(x.mass.size(), y.mass.size());
  for (std::size_t k = 0; k < n; ++k)
    EXPECT_NEAR(x.at(static_cast<std::int64_t>(k)), y.at(static_cast<std::int64_t>(k)), tol) << "k=" << k;
}

Pmf random_pmf(Rng& rng, std::size_t max_len = 12) {
  const std::size_t len = 1 + rng.below(max_len);
  std::vector<double> m(len);
  double s = 0;
  for (double& v : m) s += v = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
  if (s == 0) {
    m[0] = 1;
    s = 1;
  }
  for (double& v : m) v /= s;
  return pmf_from(m);
}

// exp of a concave quadratic: log-concave with no internal zeros.
Pmf random_log_concave(Rng& rng) {
  const std::size_t len = 2 + rng.below(12);
  const double a = 0.05 + rng.uniform(), b = 4 * rng.uniform() - 2;
  std::vector<double> m(len);
  double s = 0;
  for (std::size_t k = 0; k < len; ++k) s += m[k] = std::exp(-a * k * k + b * k);
  for (double& v : m) v /= s;
  return pmf_from(m);
}

}  // namespace

TEST(Pmf, StepPlus) {
  expect_mass(pmf_step_plus(delta(0), 0.3), {0.7, 0.3});
  expect_mass(pmf_step_plus(delta(1), 0.5), {0.5, 0.0, 0.5});
  expect_mass(pmf_step_plus(pmf_from({0.5, 0.5}), 0.5), {0.5, 0.25, 0.25});
}

TEST(Pmf, Thin) {
  Rng rng(1);
  const Pmf x = random_pmf(rng);
  expect_same(pmf_thin(x, 1.0), x, 1e-15);
  expect_mass(pmf_thin(x, 0.0), {1.0});
  expect_mass(pmf_thin(delta(2), 0.5), {0.25, 0.5, 0.25});
}

TEST(Pmf, ThinComposition) {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Pmf x = random_pmf(rng, 80);
    const double a = rng.uniform(), b = rng.uniform();
    expect_same(pmf_thin(pmf_thin(x, a), b), pmf_thin(x, a * b), 1e-12);
  }
}

TEST(Pmf, Convolve) {
  Rng rng(3);
  const Pmf x = random_pmf(rng);
  expect_same(pmf_convolve(x, delta(0)), x, 1e-15);
  expect_mass(pmf_convolve(delta(1), delta(2)), {0, 0, 0, 1});
  expect_mass(pmf_convolve_power(pmf_from({0.75, 0.25}), 2), {9.0 / 16, 6.0 / 16, 1.0 / 16});
  expect_same(pmf_convolve_power(x, 3), pmf_convolve(pmf_convolve(x, x), x), 1e-14);
  const Pmf a = pmf_from({0.5, 0.5}, 0.0), b = pmf_from({0.9}, 0.1);
  EXPECT_NEAR(pmf_convolve(a, b).dropped_tail, 0.1, 1e-15);
}

TEST(Pmf, ApplyA) {
  const Pmf a = apply_A(delta(0), 2, 0.5);
  expect_mass(a, {9.0 / 16, 6.0 / 16, 1.0 / 16}, 1e-14);
  EXPECT_NEAR(a.mean(), 0.5, 1e-15);
  for (int d : {2, 3, 5}) {
    const Pmf b = apply_A(delta(0), d, 1.0);
    expect_same(b, binomial_pmf(d, 1.0 / d), 1e-15);
    EXPECT_NEAR(b.mean(), 1.0, 1e-14);
  }
}

TEST(Pmf, MeanIdentity) {
  Rng rng(4);
  for (int d : {2, 3, 4})
    for (double p : {0.3, 4.0 / 9, 0.5, 0.7})
      for (int i = 0; i < 100; ++i) {
        const Pmf x = random_pmf(rng, 30);
        const double lhs = apply_A(x, d, p).mean() - x.mean();
        EXPECT_NEAR(lhs, 2 * p - 1 + (1 - p) * x.at(0), 1e-10);
      }
}

TEST(Pmf, MassConservation) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const Pmf x = random_pmf(rng, 40);
    const Pmf y = random_pmf(rng, 40);
    for (const Pmf& z : {pmf_step_plus(x, rng.uniform()), pmf_thin(x, rng.uniform()),
                         pmf_convolve(x, y), apply_A(x, 3, rng.uniform())})
      EXPECT_NEAR(z.total() + z.dropped_tail, 1.0, 1e-12);
  }
}

TEST(Pmf, ConditionPositive) {
  expect_mass(condition_positive(pmf_from({0.5, 0.5})), {0, 1});
  const Pmf x = pmf_from({0, 0.25, 0.75});
  expect_same(condition_positive(x), x, 1e-15);
  expect_mass(condition_positive(pmf_from({9.0 / 16, 6.0 / 16, 1.0 / 16})), {0, 6.0 / 7, 1.0 / 7});
  EXPECT_THROW(condition_positive(delta(0)), std::invalid_argument);
}

TEST(Pmf, SizeBias) {
  expect_same(size_bias(delta(4)), delta(4), 1e-15);
  expect_mass(size_bias(binomial_pmf(2, 0.5)), {0, 0.5, 0.5});
  EXPECT_THROW(size_bias(delta(0)), std::invalid_argument);
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    Pmf x = random_pmf(rng);
    if (x.at(0) >= 1.0 - 1e-12) continue;
    expect_same(size_bias(x), size_bias(condition_positive(x)), 1e-14);
  }
}

TEST(Pmf, SizeBiasOfThinning) {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const Pmf x = random_pmf(rng, 30);
    if (!(x.mean() > 1e-9)) continue;
    const double q = 0.05 + 0.95 * rng.uniform();
    const Pmf lhs = size_bias(pmf_thin(x, q));
    const Pmf rhs = pmf_convolve(delta(1), pmf_thin(pmf_shift(size_bias(x), -1), q));
    expect_same(lhs, rhs, 1e-12);
  }
}

TEST(Pmf, LogConcavity) {
  EXPECT_FALSE(is_log_concave(pmf_from({0.5, 0, 0.5})));
  EXPECT_TRUE(is_log_concave(binomial_pmf(2, 0.5)));
  EXPECT_TRUE(is_log_concave(delta(3)));
  // Bin(Y_1 + Y_2 + 2, 1/2): the first inequality changes sign at p = 4/9.
  for (double p : {0.3, 0.4, 4.0 / 9, 0.46, 0.6, 0.9}) {
    const Pmf x = apply_A(delta(1), 2, p);
    const double gap = x.at(1) * x.at(1) - x.at(0) * x.at(2);
    EXPECT_NEAR(gap, (9 * p - 4) * (3 * p - 4) * (3 * p - 4) * p / 128, 1e-14);
    const double gap3 = x.at(3) * x.at(3) - x.at(2) * x.at(4);
    EXPECT_NEAR(gap3, (9 * p - 4) * p * p * p / 128, 1e-14);
    if (p < 4.0 / 9 - 1e-9) {
      EXPECT_FALSE(is_log_concave(x));
    } else if (p > 4.0 / 9 + 1e-9) {
      EXPECT_TRUE(is_log_concave(x));
    }
  }
}

TEST(Pmf, LogConcaveClosure) {
  Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    const Pmf x = random_log_concave(rng), y = random_log_concave(rng);
    ASSERT_TRUE(is_log_concave(x));
    EXPECT_TRUE(is_log_concave(pmf_convolve(x, y), 1e-9));
    EXPECT_TRUE(is_log_concave(pmf_thin(x, rng.uniform()), 1e-9));
  }
}

TEST(Pmf, Orders) {
  Rng rng(9);
  const Pmf x = random_pmf(rng);
  EXPECT_TRUE(lr_dominates(x, x));
  EXPECT_TRUE(st_dominates(x, x));
  EXPECT_TRUE(st_dominates(delta(1), delta(2)));
  EXPECT_FALSE(st_dominates(delta(2), delta(1)));
  for (int i = 0; i < 200; ++i) {
    const Pmf y = random_log_concave(rng);
    EXPECT_TRUE(lr_dominates(y, pmf_shift(y, 1)));
  }
}

TEST(Pmf, LrImpliesSt) {
  Rng rng(10);
  int found = 0;
  for (int i = 0; found < 1000 && i < 1000000; ++i) {
    const Pmf x = random_pmf(rng, 5), y = random_pmf(rng, 5);
    if (!lr_dominates(x, y)) continue;
    ++found;
    EXPECT_TRUE(st_dominates(x, y));
  }
  EXPECT_EQ(found, 1000);
}

TEST(Pmf, SizeBiasPreservesLrOrder) {
  Rng rng(11);
  int found = 0;
  for (int i = 0; found < 500 && i < 2000000; ++i) {
    const Pmf x = random_pmf(rng, 5), y = random_pmf(rng, 5);
    if (!(x.mean() > 0 && y.mean() > 0) || !lr_dominates(x, y)) continue;
    ++found;
    EXPECT_TRUE(lr_dominates(size_bias(x), size_bias(y), 1e-9));
  }
  EXPECT_EQ(found, 500);
}

TEST(Pmf, StToleranceUsesDroppedTails) {
  const Pmf x = pmf_from({0.0, 1.0 - 1e-8}, 1e-8);
  const Pmf y = pmf_from({0.0, 1.0});
  EXPECT_TRUE(st_dominates(x, y));
  const Pmf z = pmf_from({1e-6, 1.0 - 1e-6});
  EXPECT_TRUE(st_dominates(z, y));
  EXPECT_FALSE(st_dominates(y, z));
}
