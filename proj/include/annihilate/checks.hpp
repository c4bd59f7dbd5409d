// Batch drivers for the pathwise coupling checks and the exact tree
// inequality suite, shared by the CLI and the acceptance binary.

#ifndef ANNIHILATE_CHECKS_HPP_
#define ANNIHILATE_CHECKS_HPP_

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "annihilate/couplings.hpp"
#include "annihilate/engine.hpp"
#include "annihilate/experiments.hpp"
#include "annihilate/tree_exact.hpp"

namespace annihilate {

// ---------------------------------------------------------------------------
// Coupling checks
// ---------------------------------------------------------------------------

struct VerifyOptions {
  std::string check;  // path-swap | change-track | sequential | polarized | monotone
  std::int64_t trials = 100;
  std::uint64_t seed = 1;
  GraphSpec graph = GraphSpec::Line();
  double p = 0.5;
  double lambda_b = 0.0;
  double t = 20.0;
  std::int64_t sites = 50;  // line only: segment length around the root
  int samples = 64;
  int workers = 0;
};

// Line: a segment of opts.sites sites. Otherwise a small ball.
inline Region verify_region(const VerifyOptions& opts) {
  switch (opts.graph.kind) {
    case GraphKind::kLine: {
      if (opts.sites < 1) throw std::invalid_argument("sites must be positive");
      const std::int64_t lo = -(opts.sites / 2);
      return Region::Interval(lo, lo + opts.sites - 1);
    }
    case GraphKind::kLattice: return Region::Ball(opts.graph.d == 2 ? 4 : 2);
    case GraphKind::kTorus: return Region::Ball(opts.graph.r * opts.graph.dim());
    case GraphKind::kBiTree: return Region::Ball(opts.graph.n);
  }
  return Region::Ball(0);
}

inline SimParams verify_params(const VerifyOptions& opts, std::uint64_t seed) {
  SimParams s;
  s.graph = opts.graph;
  s.region = verify_region(opts);
  s.p = opts.p;
  s.lambda_a = 1.0;
  s.lambda_b = opts.lambda_b;
  s.horizon = opts.t;
  s.seed = seed;
  for (int i = 1; i <= opts.samples; ++i) s.sample_times.push_back(opts.t * i / opts.samples);
  s.record_fields = true;
  return s;
}

namespace detail {

inline std::string trial_prefix(std::uint64_t seed) {
  return "seed " + std::to_string(seed) + ": ";
}

inline CheckReport one_trial(const VerifyOptions& opts, std::uint64_t seed) {
  const SimParams s = verify_params(opts, seed);
  const Configuration config = init_configuration(s);
  CheckReport rep{opts.check, 1, 0, {}};
  Rng pick(derive_seed(seed, {tag::kCheck}));
  if (opts.check == "path-swap") {
    const RunResult a = run_crs(s, config);
    const PathSwapResult b = run_path_swapping(s, config);
    for (std::size_t k = 0; k < a.fields.size(); ++k)
      if (a.fields[k] != b.fields[k]) {
        std::ostringstream os;
        os << trial_prefix(seed) << "fields differ at t=" << s.sample_times[k];
        rep.fail(os.str());
        break;
      }
  } else if (opts.check == "change-track") {
    std::size_t num_a = 0;
    for (const auto& q : config) num_a += q.kind == Kind::kA;
    const std::size_t n = pick.below(static_cast<std::uint32_t>(num_a + 1));
    const CheckReport r = check_change_tracking(s, config, n);
    if (!r.ok()) rep.fail(trial_prefix(seed) + "cut " + std::to_string(n) + ": " + r.first_counterexample);
  } else if (opts.check == "sequential") {
    const CoupledSequential c = run_sequential_coupled(s, config);
    if (c.sequential.v_total + 1e-9 < c.v_dlas) {
      std::ostringstream os;
      os << trial_prefix(seed) << "sequential " << c.sequential.v_total << " < dlas " << c.v_dlas;
      rep.fail(os.str());
    }
  } else if (opts.check == "polarized") {
    const PolarizedResult r = run_polarized(s, config, assign_polarity(s, config, PolarityRule::kRandom));
    if (r.invariant_violations > 0) {
      rep.fail(trial_prefix(seed) + std::to_string(r.invariant_violations) + " invariant violations");
    } else if (r.obs.v_final > r.v_positive + r.v_negative + 1e-9) {
      std::ostringstream os;
      os << trial_prefix(seed) << "V=" << r.obs.v_final << " > V+ + V- = " << r.v_positive + r.v_negative;
      rep.fail(os.str());
    }
  } else if (opts.check == "monotone") {
    // Add A-particles on up to three B sites and remove up to three other B's.
    std::vector<SiteId> bs;
    for (const auto& q : config)
      if (q.kind == Kind::kB) bs.push_back(q.site);
    for (std::size_t i = bs.size(); i > 1; --i)
      std::swap(bs[i - 1], bs[pick.below(static_cast<std::uint32_t>(i))]);
    const std::size_t n_add = std::min<std::size_t>(3, bs.size());
    const std::size_t n_rem = std::min<std::size_t>(3, bs.size() - n_add);
    const std::vector<SiteId> added(bs.begin(), bs.begin() + static_cast<std::ptrdiff_t>(n_add));
    const std::vector<SiteId> removed(bs.begin() + static_cast<std::ptrdiff_t>(n_add),
                                      bs.begin() + static_cast<std::ptrdiff_t>(n_add + n_rem));
    const CheckReport r = check_monotonicity(s, config, added, removed);
    if (!r.ok()) rep.fail(trial_prefix(seed) + r.first_counterexample);
  } else {
    throw std::invalid_argument("unknown check '" + opts.check + "'");
  }
  rep.failures = rep.first_counterexample.empty() ? 0 : 1;
  return rep;
}

}  // namespace detail

inline CheckReport verify_couplings(const VerifyOptions& opts) {
  if (opts.trials < 1) throw std::invalid_argument("trials must be positive");
  if ((opts.check == "sequential" || opts.check == "polarized") && opts.lambda_b != 0)
    throw std::invalid_argument(opts.check + " needs lambda_b = 0");
  const auto reports = parallel_map(static_cast<std::size_t>(opts.trials), resolve_workers(opts.workers),
                                    [&](std::size_t i) {
                                      return detail::one_trial(opts, split_seed(opts.seed, i));
                                    });
  CheckReport total{opts.check, 0, 0, {}};
  for (const auto& r : reports) total.merge(r);
  return total;
}

inline Json report_to_json(const CheckReport& r) {
  Json j{{"check", r.check}, {"trials", r.trials}, {"failures", r.failures}};
  if (!r.first_counterexample.empty()) j["first_counterexample"] = r.first_counterexample;
  return j;
}

// ---------------------------------------------------------------------------
// Tree inequality suite
// ---------------------------------------------------------------------------

struct TreeSuite {
  RecursionSeries w, u;
  std::vector<InequalityReport> reports;
  bool ok() const {
    return std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.ok(); });
  }
};

// checks: any of logconcave, sizebias, dominance, anticoncentration, growth.
inline TreeSuite tree_check_suite(int d, double p, int n_max, double tail_eps,
                                  const std::vector<std::string>& checks) {
  TreeSuite s;
  s.w = w_sequence(d, p, n_max, tail_eps);
  s.u = u_sequence(d, p, n_max, tail_eps);
  for (const auto& c : checks) {
    if (c == "logconcave") {
      s.reports.push_back(check_log_concavity(s.u));
    } else if (c == "sizebias") {
      InequalityReport r;
      for (int n = 1; n <= n_max; ++n) r.merge(check_sb_coupling_bound(s.u, static_cast<std::size_t>(n)));
      r.check = "U_n^s <=st 1 + sum Bin(2,d^-i) + U_n";
      s.reports.push_back(r);
    } else if (c == "dominance") {
      s.reports.push_back(check_dominance(s.w, s.u));
    } else if (c == "anticoncentration") {
      s.reports.push_back(check_anticoncentration(s.w));
    } else if (c == "growth") {
      s.reports.push_back(check_growth(s.w, s.u, sb_coupling_q(d)));
    } else {
      throw std::invalid_argument("unknown tree check '" + c + "'");
    }
  }
  return s;
}

inline Json inequality_to_json(const InequalityReport& r) {
  Json j{{"check", r.check}, {"checked", r.checked}, {"violations", r.violations}};
  j["worst_margin"] = std::isfinite(r.worst_margin) ? Json(r.worst_margin) : Json(nullptr);
  if (!r.first_violation.empty()) j["first_violation"] = r.first_violation;
  return j;
}

}  // namespace annihilate

#endif  // ANNIHILATE_CHECKS_HPP_
