#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "annihilate/analysis.hpp"
#include "annihilate/engine.hpp"

using namespace annihilate;

namespace {

SimParams line_params(std::int64_t radius, double p, double lb, double t, std::uint64_t seed) {
  SimParams s;
  s.graph = GraphSpec::Line();
  s.region = Region::Ball(radius);
  s.p = p;
  s.lambda_a = 1.0;
  s.lambda_b = lb;
  s.horizon = t;
  s.seed = seed;
  return s;
}

std::vector<double> grid(double t, int n) {
  std::vector<double> g;
  for (int i = 1; i <= n; ++i) g.push_back(t * i / n);
  return g;
}

}  // namespace

TEST(Engine, ValidateRejectsBadParams) {
  SimParams s = line_params(5, 0.5, 0, 1, 1);
  s.lambda_a = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = line_params(5, 1.5, 1, 1, 1);
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = line_params(5, 0.5, 1, 1, 1);
  s.sample_times = {0.5, 0.2};
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.sample_times = {2.0};
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Engine, InitExtremes) {
  auto s = line_params(10, 1.0, 1, 1, 3);
  for (const auto& q : init_configuration(s)) EXPECT_EQ(q.kind, Kind::kA);
  s.p = 0.0;
  for (const auto& q : init_configuration(s)) EXPECT_EQ(q.kind, Kind::kB);
  EXPECT_EQ(init_configuration(s).size(), 21u);
}

TEST(Engine, InitReproducibleAndFair) {
  auto s = line_params(10, 0.5, 1, 1, 99);
  const auto a = init_configuration(s);
  const auto b = init_configuration(s);
  ASSERT_EQ(a.size(), 21u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].kind, b[i].kind);
  std::int64_t count = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    s.seed = seed;
    for (const auto& q : init_configuration(s)) {
      count += q.kind == Kind::kA;
      ++total;
    }
  }
  EXPECT_NEAR(static_cast<double>(count) / total, 0.5, 0.015);
}

TEST(Engine, Discrepancy) {
  Configuration all_a{{0, Kind::kA}, {1, Kind::kA}, {2, Kind::kA}};
  EXPECT_EQ(discrepancy(all_a, {0, 1, 2}), 3);
  Configuration alt{{0, Kind::kA}, {1, Kind::kB}, {2, Kind::kA}, {3, Kind::kB}};
  EXPECT_EQ(discrepancy(alt, {0, 1, 2, 3}), 0);
  EXPECT_EQ(discrepancy(alt, {0}), 1);

  // Law of D over two sites at p = 1/2.
  std::map<std::int64_t, int> law;
  auto s = line_params(0, 0.5, 1, 1, 0);
  s.region = Region::Sites({0, 1});
  const int n = 40000;
  for (int seed = 0; seed < n; ++seed) {
    s.seed = static_cast<std::uint64_t>(seed);
    ++law[discrepancy(init_configuration(s), {0, 1})];
  }
  EXPECT_NEAR(law[-2] / double(n), 0.25, 0.01);
  EXPECT_NEAR(law[0] / double(n), 0.5, 0.01);
  EXPECT_NEAR(law[2] / double(n), 0.25, 0.01);
}

TEST(Engine, TwoSiteFirstJumpKill) {
  // A at the root, stationary B at 1. The A dies on its first jump exactly
  // when that jump goes right, in which case its root time equals its death.
  // Walks that wander off to the left may outlive the horizon.
  SimParams s = line_params(0, 0.5, 0, 1e4, 0);
  s.record_visits = true;
  const Configuration c{{0, Kind::kA}, {1, Kind::kB}};
  const int n = 4000;
  int first = 0;
  for (int seed = 0; seed < n; ++seed) {
    s.seed = static_cast<std::uint64_t>(seed);
    const auto r = run_crs(s, c);
    EXPECT_EQ(r.death_time[0], r.death_time[1]);
    first += r.death_time[0] < kInf && r.obs.occupancy[0] == r.death_time[0];
  }
  EXPECT_LT(std::abs(first - n / 2.0), 4 * std::sqrt(n * 0.25));
}

TEST(Engine, FrozenSystemIsConstant) {
  // Only B-particles may move and there are none: nothing happens.
  SimParams s = line_params(6, 1.0, 1.0, 7.5, 4);
  s.lambda_a = 0;
  s.sample_times = {1.0, 7.5};
  s.record_fields = true;
  const auto r = run_crs(s);
  EXPECT_EQ(r.events, 0u);
  EXPECT_DOUBLE_EQ(r.obs.v_final, 7.5);
  EXPECT_EQ(r.fields[0], r.fields[1]);
  SimParams both = s;
  both.lambda_b = 0;
  EXPECT_THROW(run_crs(both), std::invalid_argument);
}

TEST(Engine, SingleWalkerOccupation) {
  // E V_1 = int_0^1 e^{-s} I_0(s) ds for a lone walker started at the root.
  SimParams s = line_params(0, 1.0, 0, 1.0, 0);
  RunningStats v;
  for (std::uint64_t seed = 0; seed < 20000; ++seed) {
    s.seed = seed;
    v.add(run_crs(s).obs.v_final);
  }
  double exact = 0;
  const int m = 2000;
  for (int i = 0; i < m; ++i) {
    const double x = (i + 0.5) / m;
    exact += std::exp(-x) * std::cyl_bessel_i(0.0, x) / m;
  }
  EXPECT_LT(std::abs(v.mean() - exact), 4 * v.stderr_());
  s.horizon = 1e-3;
  s.seed = 1;
  EXPECT_NEAR(run_crs(s).obs.v_final, 1e-3, 1e-3 * 0.05);
}

TEST(Engine, OccupationEstimator) {
  ObservableSeries a, b;
  a.times = b.times = {1.0};
  a.n_root = {0.0};
  b.n_root = {0.0};
  auto z = occupation_estimator({a, b});
  EXPECT_EQ(z[0].mean, 0.0);
  EXPECT_EQ(z[0].stderr_, 0.0);
  b.n_root = {1.0};
  z = occupation_estimator({a, b});
  EXPECT_DOUBLE_EQ(z[0].mean, 0.5);
  EXPECT_DOUBLE_EQ(z[0].stderr_, 0.5);
  EXPECT_THROW(occupation_estimator({a}), std::invalid_argument);
  b.times = {2.0};
  EXPECT_THROW(occupation_estimator({a, b}), std::invalid_argument);
}

TEST(Engine, NoBMeansConservedDensity) {
  // Torus with only A-particles: by symmetry the root density stays 1.
  SimParams s;
  s.graph = GraphSpec::Torus(1, 8);
  s.region = Region::Ball(8);
  s.p = 1.0;
  s.lambda_b = 1.0;
  s.horizon = 5.0;
  s.sample_times = {2.5, 5.0};
  std::vector<ObservableSeries> reps;
  for (std::uint64_t seed = 0; seed < 4000; ++seed) {
    s.seed = seed;
    reps.push_back(run_crs(s).obs);
  }
  for (const auto& pt : occupation_estimator(reps))
    EXPECT_LT(std::abs(pt.mean - 1.0), 4 * pt.stderr_);
}

TEST(Engine, ParityPurityDeterminism) {
  for (double lb : {0.0, 1.0}) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      SimParams s = line_params(20, 0.5, lb, 15, seed);
      s.sample_times = grid(15, 30);
      s.record_fields = true;
      s.record_visits = true;
      const auto r = run_crs(s);
      EXPECT_EQ(r.a_dead, r.b_dead);
      const auto again = run_crs(s);
      EXPECT_EQ(r.fields, again.fields);
      EXPECT_EQ(r.obs.v_root, again.obs.v_root);
      EXPECT_EQ(r.death_time, again.death_time);
      for (std::size_t k = 1; k < r.obs.v_root.size(); ++k)
        EXPECT_LE(r.obs.v_root[k - 1], r.obs.v_root[k]);
      // Signed totals: every death removes one A and one B.
      const auto config = init_configuration(s);
      const std::int64_t d0 = discrepancy(config, s.region.sites(Graph(s.graph)));
      std::int64_t sum = 0;
      for (const auto& [site, v] : r.fields.back()) sum += v;
      EXPECT_EQ(sum, d0);
    }
  }
}

TEST(Engine, JumpCountsArePoisson) {
  const double rate = 2.0, t = 3.0;
  SimParams s = line_params(0, 1.0, 0, t, 0);
  s.lambda_a = rate;
  RunningStats jumps;
  std::vector<double> xs;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    s.seed = seed;
    const double j = static_cast<double>(run_crs(s).events);
    jumps.add(j);
  }
  const double mu = rate * t;
  EXPECT_LT(std::abs(jumps.mean() - mu), 4 * std::sqrt(mu / 10000));
  EXPECT_LT(std::abs(jumps.variance() - mu), 4 * std::sqrt((mu + 2 * mu * mu) / 10000));
}

TEST(Engine, DensityDecreases) {
  std::vector<ObservableSeries> reps;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    SimParams s = line_params(30, 0.5, 1.0, 20, seed);
    s.sample_times = {2.5, 5, 10, 20};
    reps.push_back(run_crs(s).obs);
  }
  const auto est = occupation_estimator(reps);
  for (std::size_t k = 1; k < est.size(); ++k)
    EXPECT_LE(est[k].mean, est[k - 1].mean + 4 * std::max(est[k].stderr_, est[k - 1].stderr_));
}

TEST(Engine, TreeWalkersEscape) {
  SimParams s;
  s.graph = GraphSpec::BiTree(2, 4);
  s.region = Region::Ball(4);
  s.p = 1.0;
  s.lambda_b = 0;
  s.horizon = kInf;
  const auto r = run_crs(s);
  for (double e : r.escape_time) EXPECT_LT(e, kInf);
  EXPECT_LT(r.obs.v_final, kInf);
}
