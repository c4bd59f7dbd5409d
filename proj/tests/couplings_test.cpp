#include <gtest/gtest.h>

#include <cmath>

#include "annihilate/analysis.hpp"
#include "annihilate/couplings.hpp"

using namespace annihilate;

namespace {

SimParams base(GraphSpec g, std::int64_t radius, double lb, double t, std::uint64_t seed,
               int samples = 16) {
  SimParams s;
  s.graph = g;
  s.region = Region::Ball(radius);
  s.p = 0.5;
  s.lambda_a = 1.0;
  s.lambda_b = lb;
  s.horizon = t;
  s.seed = seed;
  for (int i = 1; i <= samples; ++i) s.sample_times.push_back(t * i / samples);
  s.record_fields = true;
  return s;
}

double pooled(const RunningStats& a, const RunningStats& b) {
  return std::sqrt(a.stderr_() * a.stderr_() + b.stderr_() * b.stderr_());
}

}  // namespace

TEST(PathSwap, MatchesCrsOnManyGeometries) {
  const std::vector<std::pair<GraphSpec, std::int64_t>> cases{
      {GraphSpec::Line(), 25}, {GraphSpec::Lattice(2), 4},
      {GraphSpec::Torus(2, 3), 3}, {GraphSpec::BiTree(2, 5), 5}};
  for (const auto& [g, radius] : cases)
    for (double lb : {0.0, 1.0, 0.3})
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const SimParams s = base(g, radius, lb, 10, seed);
        const auto a = run_crs(s);
        const auto b = run_path_swapping(s);
        ASSERT_EQ(a.fields, b.fields) << g.to_string() << " lb=" << lb << " seed=" << seed;
        EXPECT_NEAR(a.obs.v_final, b.obs.v_final, 1e-9);
      }
}

TEST(PathSwap, SingleCollision) {
  SimParams s = base(GraphSpec::Line(), 0, 0.0, 200, 0, 40);
  const Configuration c{{0, Kind::kA}, {1, Kind::kB}};
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    s.seed = seed;
    const auto r = run_path_swapping(s, c);
    bool collided = false;
    SiteId frozen = 0;
    for (std::size_t k = 0; k < s.sample_times.size(); ++k) {
      const AState& a = r.a_states[k][0];
      if (!collided && !a.visible) {
        collided = true;
        frozen = a.site;
        EXPECT_EQ(frozen, 1);
        EXPECT_TRUE(r.b_sites[k].empty());
      }
      if (collided) {
        EXPECT_FALSE(a.visible);
        EXPECT_EQ(a.site, frozen);
      }
    }
  }
}

TEST(ChangeTracking, HoldsForEveryCut) {
  for (double lb : {0.0, 1.0})
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      const SimParams s = base(GraphSpec::Line(), 15, lb, 12, seed);
      const auto config = init_configuration(s);
      std::size_t num_a = 0;
      for (const auto& q : config) num_a += q.kind == Kind::kA;
      for (std::size_t n : {std::size_t{0}, num_a / 3, num_a / 2, num_a}) {
        const auto rep = check_change_tracking(s, config, n);
        EXPECT_TRUE(rep.ok()) << rep.first_counterexample;
      }
    }
}

TEST(Sequential, RejectsMovingB) {
  SimParams s = base(GraphSpec::Line(), 5, 1.0, 5, 0);
  EXPECT_THROW(run_sequential(s), std::invalid_argument);
  EXPECT_THROW(run_polarized(s, init_configuration(s), std::vector<std::int8_t>(11, 1)),
               std::invalid_argument);
}

TEST(Sequential, AbsorbedAtRoot) {
  SimParams s = base(GraphSpec::Line(), 0, 0.0, kInf, 0, 0);
  s.region = Region::Sites({0, 1});
  const Configuration c{{0, Kind::kB}, {1, Kind::kA}};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    s.seed = seed;
    const auto run = run_sequential(s, c);
    ASSERT_EQ(run.particles.size(), 1u);
    const auto& rec = run.particles[0];
    EXPECT_EQ(rec.cause, HaltCause::kHitB);
    EXPECT_TRUE(rec.visited_root);
    EXPECT_EQ(rec.root_time, 0.0);
    EXPECT_TRUE(run.surviving_b.empty());
  }
}

TEST(Sequential, NoBEqualsFreeWalks) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SimParams s = base(GraphSpec::Line(), 12, 0.0, 8, seed, 0);
    s.p = 1.0;
    const auto seq = run_sequential(s);
    for (const auto& rec : seq.particles) EXPECT_EQ(rec.cause, HaltCause::kTimeUp);
    EXPECT_NEAR(seq.v_total, run_crs(s).obs.v_final, 1e-9);
  }
}

TEST(Sequential, CoupledDominatesDlas) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const SimParams s = base(GraphSpec::Line(), 20, 0.0, 10, seed, 0);
    const auto c = run_sequential_coupled(s, init_configuration(s));
    EXPECT_GE(c.sequential.v_total + 1e-9, c.v_dlas) << "seed " << seed;
  }
}

TEST(Sequential, CoupledDominatesOnTreeAndPlane) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    for (auto [g, radius] : {std::pair{GraphSpec::BiTree(2, 6), 6},
                             std::pair{GraphSpec::Lattice(2), 4}}) {
      const SimParams s = base(g, radius, 0.0, 6, seed, 0);
      const auto c = run_sequential_coupled(s, init_configuration(s));
      EXPECT_GE(c.sequential.v_total + 1e-9, c.v_dlas) << g.to_string() << " seed " << seed;
    }
  }
}

TEST(Sequential, OrderDoesNotChangeLaw) {
  RunningStats a, b;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    SimParams s = base(GraphSpec::Line(), 10, 0.0, 5, seed, 0);
    const auto c = init_configuration(s);
    a.add(run_sequential(s, c).v_total);
    Configuration left_to_right = c;
    std::sort(left_to_right.begin(), left_to_right.end(),
              [](const auto& x, const auto& y) { return x.site < y.site; });
    s.seed = seed + 1'000'000;  // independent sample for the second ordering
    Configuration other = init_configuration(s);
    std::sort(other.begin(), other.end(),
              [](const auto& x, const auto& y) { return x.site < y.site; });
    b.add(run_sequential(s, other).v_total);
  }
  EXPECT_LT(std::abs(a.mean() - b.mean()), 3 * pooled(a, b));
}

TEST(Sequential, MatchesHalfLineSampler) {
  // Path-level half-line runs against the gambler's-ruin sampler.
  const double p = 0.35;
  const std::int64_t k_max = 24;
  const int reps = 3000;
  std::vector<RunningStats> path(4), fast(4);
  RunningStats path_total, fast_total;
  std::int64_t censored = 0;
  SequentialOptions opt;
  opt.lazy_landscape_from = k_max + 1;
  for (int i = 0; i < reps; ++i) {
    SimParams s = base(GraphSpec::Line(), 0, 0.0, kInf, split_seed(7, i), 0);
    s.p = p;
    s.region = Region::Interval(0, k_max);
    const auto run = run_sequential(s, opt);
    censored += run.censored;
    std::vector<double> per(4, 0.0);
    for (const auto& rec : run.particles)
      if (rec.start < 4) per[rec.start] = rec.root_time;
    for (int k = 0; k < 4; ++k) path[k].add(per[k]);
    path_total.add(run.v_total);

    Rng rng(split_seed(8, i));
    const auto h = sample_halfline_uplus(p, k_max, rng, 4);
    for (int k = 0; k < 4; ++k) fast[k].add(h.per_site[k]);
    fast_total.add(h.total);
  }
  std::cerr << "censored walks: " << censored << "\n";
  EXPECT_LT(censored, reps / 100);
  for (int k = 0; k < 4; ++k)
    EXPECT_LT(std::abs(path[k].mean() - fast[k].mean()), 4 * pooled(path[k], fast[k])) << k;
  EXPECT_LT(std::abs(path_total.mean() - fast_total.mean()), 4 * pooled(path_total, fast_total));
}

TEST(Polarized, AllPositiveIsCrs) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const SimParams s = base(GraphSpec::Line(), 15, 0.0, 10, seed);
    const auto c = init_configuration(s);
    const auto pol = run_polarized(s, c, assign_polarity(s, c, PolarityRule::kAllPositive));
    EXPECT_EQ(pol.fields, run_crs(s, c).fields);
    EXPECT_EQ(pol.invariant_violations, 0);
  }
}

TEST(Polarized, Subadditive) {
  for (auto rule : {PolarityRule::kRandom, PolarityRule::kSignOfFirstCoordinate})
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const SimParams s = base(GraphSpec::Line(), 15, 0.0, 10, seed);
      const auto c = init_configuration(s);
      const auto r = run_polarized(s, c, assign_polarity(s, c, rule));
      EXPECT_LE(r.obs.v_final, r.v_positive + r.v_negative + 1e-9) << seed;
      EXPECT_EQ(r.invariant_violations, 0);
    }
}

TEST(Polarized, VisibleLawMatchesCrs) {
  RunningStats pol, crs;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    SimParams s = base(GraphSpec::Line(), 0, 0.0, 5, seed, 0);
    s.region = Region::Interval(-10, 9);
    const auto c = init_configuration(s);
    pol.add(run_polarized(s, c, assign_polarity(s, c, PolarityRule::kRandom)).obs.v_final);
    s.seed = seed + 5'000'000;
    crs.add(run_crs(s).obs.v_final);
  }
  EXPECT_LT(std::abs(pol.mean() - crs.mean()), 3 * pooled(pol, crs));
}

TEST(Monotonicity, Identity) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SimParams s = base(GraphSpec::Line(), 15, 1.0, 8, seed);
    const auto c = init_configuration(s);
    EXPECT_TRUE(check_monotonicity(s, c, {}, {}).ok());
    const auto a = run_crs(s, c);
    const auto b = run_crs(s, raise_configuration(c, {}, {}));
    EXPECT_EQ(a.fields, b.fields);
  }
}

TEST(Monotonicity, RemoveAllB) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SimParams s = base(GraphSpec::Line(), 15, 1.0, 8, seed);
    const auto c = init_configuration(s);
    std::vector<SiteId> bs;
    for (const auto& q : c)
      if (q.kind == Kind::kB) bs.push_back(q.site);
    const auto rep = check_monotonicity(s, c, {}, bs);
    EXPECT_TRUE(rep.ok()) << rep.first_counterexample;
    SimParams t = s;
    const auto raised = run_crs(t, raise_configuration(c, {}, bs));
    EXPECT_EQ(raised.a_dead, 0);
  }
}

TEST(Monotonicity, AddedParticles) {
  for (double lb : {0.0, 1.0})
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
      SimParams s = base(GraphSpec::Line(), 0, lb, 8, seed);
      s.region = Region::Interval(-20, 19);
      const auto c = init_configuration(s);
      std::vector<SiteId> b_sites;
      for (const auto& q : c)
        if (q.kind == Kind::kB) b_sites.push_back(q.site);
      Rng rng(split_seed(seed, 77));
      std::shuffle(b_sites.begin(), b_sites.end(), rng);
      if (b_sites.size() > 3) b_sites.resize(3);
      const auto rep = check_monotonicity(s, c, b_sites, {});
      ASSERT_TRUE(rep.ok()) << "seed " << seed << ": " << rep.first_counterexample;
    }
}
