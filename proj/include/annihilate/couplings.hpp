// Alternative constructions of the annihilating system on shared randomness:
// path swapping (visible and invisible A-particles), the sequential release
// process and the polarized construction. Each comes with a checker for the
// pathwise relation it is supposed to satisfy.

#ifndef ANNIHILATE_COUPLINGS_HPP_
#define ANNIHILATE_COUPLINGS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "annihilate/engine.hpp"

namespace annihilate {

// ---------------------------------------------------------------------------
// Path swapping
// ---------------------------------------------------------------------------

enum class VisEvent : std::uint8_t { kAnnihilation, kSwapIn, kSwapOut };

struct VisLogEntry {
  double time;
  std::uint32_t number;  // A-particle number, 1-based
  VisEvent event;
};

struct AState {
  SiteId site;  // kEscaped once the particle has left a tree
  bool visible;
};

// Position and visibility change of one A-particle.
struct TrackPoint {
  double time;
  SiteId site;
  bool visible;
};

struct PathSwapResult {
  ObservableSeries obs;
  std::vector<Field> fields;                  // visible A minus B, per sample
  std::vector<std::vector<AState>> a_states;  // per sample, indexed by number-1
  std::vector<std::vector<SiteId>> b_sites;   // live B sites per sample
  std::vector<std::vector<TrackPoint>> tracks;  // per A, if requested
  std::vector<VisLogEntry> log;
  std::vector<std::size_t> a_config_index;    // number-1 -> configuration index
  std::uint64_t events = 0, swaps = 0, annihilations = 0;
};

class PathSwapEngine {
 public:
  PathSwapEngine(const SimParams& params, const Configuration& config,
                 bool record_tracks)
      : params_(params), g_(params.graph),
        cells_(g_, dense_radius_for(g_, config), config.size()),
        rec_(params, config.size()), tracks_on_(record_tracks) {
    params.validate();
    // A-particles first, in configuration order; they keep their numbers.
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < config.size(); ++i)
      if (config[i].kind == Kind::kA) order.push_back(i);
    num_a_ = order.size();
    for (std::size_t i = 0; i < config.size(); ++i)
      if (config[i].kind == Kind::kB) order.push_back(i);
    const std::size_t n = config.size();
    parts_.resize(n);
    bundles_.resize(n);
    bundle_of_.resize(n);
    res_.a_config_index.assign(order.begin(), order.begin() + num_a_);
    if (tracks_on_) res_.tracks.resize(num_a_);
    for (std::uint32_t pid = 0; pid < n; ++pid) {
      const auto& q = config[order[pid]];
      Particle& a = parts_[pid];
      a.kind = q.kind;
      a.site = q.site;
      a.cell = cells_.cell(q.site);
      bundles_[pid].brave = braveness_of(params.seed, q);
      bundles_[pid].stream =
          PathStream(particle_key(params.seed, q, tag::kPath),
                     q.kind == Kind::kA ? params.lambda_a : params.lambda_b);
      bundle_of_[pid] = pid;
      if (cells_.count(a.cell, 0) + cells_.count(a.cell, 2) > 0)
        throw std::invalid_argument("at most one particle per site initially");
      cells_.insert(a.cell, list_of(pid), pid);
      if (is_a(pid)) {
        if (q.site == g_.root()) rec_.arrive(pid, 0.0);
        track(pid, 0.0);
      }
    }
  }

  PathSwapResult run() {
    const auto& times = params_.sample_times;
    for (std::uint32_t i = 0; i < parts_.size(); ++i)
      queue_.push(stream(i).next_time(), i, 0);
    std::size_t ns = 0;
    const std::uint32_t choices = g_.num_choices();
    while (!queue_.empty()) {
      const auto ev = queue_.top();
      if (ev.time > params_.horizon) break;
      queue_.pop();
      Particle& a = parts_[ev.pid];
      if (!a.alive || ev.version != a.version) continue;
      const double t = ev.time;
      while (ns < times.size() && times[ns] < t) sample(times[ns++]);
      ++res_.events;
      const SiteId to = g_.step(a.site, stream(ev.pid).take(choices));
      detach(ev.pid, t);
      if (to == kEscaped) {
        a.alive = false;
        a.site = kEscaped;
        if (is_a(ev.pid)) track(ev.pid, t);
        continue;
      }
      a.site = to;
      a.cell = cells_.cell(to);
      attach(ev.pid, t);
      reschedule(ev.pid);
      if (is_a(ev.pid)) track(ev.pid, t);
      if (!is_a(ev.pid)) procedure_b(ev.pid, t);
      else if (a.visible) procedure_visible(ev.pid, t);
      else procedure_invisible(ev.pid, t);
    }
    while (ns < times.size()) sample(times[ns++]);
    rec_.finish(params_.horizon);
    res_.obs = std::move(rec_.obs());
    return std::move(res_);
  }

 private:
  struct Particle {
    Kind kind = Kind::kA;
    bool alive = true;
    bool visible = true;
    SiteId site = 0;
    std::int32_t cell = 0;
    std::uint32_t version = 0;
  };
  struct Bundle {
    PathStream stream;
    double brave = 0;
  };

  bool is_a(std::uint32_t pid) const { return pid < num_a_; }
  int list_of(std::uint32_t pid) const {
    return !is_a(pid) ? 2 : (parts_[pid].visible ? 0 : 1);
  }
  PathStream& stream(std::uint32_t pid) { return bundles_[bundle_of_[pid]].stream; }
  double brave(std::uint32_t pid) const { return bundles_[bundle_of_[pid]].brave; }
  bool at_root(std::uint32_t pid) const { return parts_[pid].site == g_.root(); }

  void track(std::uint32_t pid, double t) {
    if (tracks_on_)
      res_.tracks[pid].push_back({t, parts_[pid].site, parts_[pid].visible});
  }

  void detach(std::uint32_t pid, double t) {
    cells_.erase(parts_[pid].cell, list_of(pid), pid);
    if (is_a(pid) && parts_[pid].visible && at_root(pid)) rec_.leave(pid, t);
  }
  void attach(std::uint32_t pid, double t) {
    cells_.insert(parts_[pid].cell, list_of(pid), pid);
    if (is_a(pid) && parts_[pid].visible && at_root(pid)) rec_.arrive(pid, t);
  }
  void set_visible(std::uint32_t pid, bool v, double t) {
    detach(pid, t);
    parts_[pid].visible = v;
    attach(pid, t);
    track(pid, t);
  }
  void reschedule(std::uint32_t pid) {
    Particle& a = parts_[pid];
    ++a.version;
    queue_.push(stream(pid).next_time(), pid, a.version);
  }

  // Visible a_k takes the braveness and path of B-particle b and turns invisible.
  void annihilate(std::uint32_t k, std::uint32_t b, double t) {
    cells_.erase(parts_[b].cell, 2, b);
    parts_[b].alive = false;
    ++parts_[b].version;
    bundle_of_[k] = bundle_of_[b];
    set_visible(k, false, t);
    reschedule(k);
    ++res_.annihilations;
    res_.log.push_back({t, k + 1, VisEvent::kAnnihilation});
  }

  // Invisible a_in becomes visible, visible a_out becomes invisible.
  void swap(std::uint32_t in, std::uint32_t out, double t) {
    std::swap(bundle_of_[in], bundle_of_[out]);
    set_visible(out, false, t);
    set_visible(in, true, t);
    reschedule(in);
    reschedule(out);
    ++res_.swaps;
    res_.log.push_back({t, in + 1, VisEvent::kSwapIn});
    res_.log.push_back({t, out + 1, VisEvent::kSwapOut});
  }

  // Highest-braveness member of a cell list satisfying pred, or -1.
  template <class Pred>
  std::int64_t best_in(std::int32_t cell, int list, Pred pred) const {
    std::int64_t best = -1;
    for (std::int32_t j = cells_.head(cell, list); j != CellStore::kNil;
         j = cells_.next(j)) {
      const auto u = static_cast<std::uint32_t>(j);
      if (!pred(u)) continue;
      if (best < 0 || brave(u) > brave(static_cast<std::uint32_t>(best)) ||
          (brave(u) == brave(static_cast<std::uint32_t>(best)) && u < best))
        best = u;
    }
    return best;
  }

  void procedure_visible(std::uint32_t k, double t) {
    const std::int32_t c = parts_[k].cell;
    for (std::size_t guard = 0;; ++guard) {
      if (guard > parts_.size()) throw std::logic_error("procedure (i) did not terminate");
      const std::int64_t b = best_in(c, 2, [](std::uint32_t) { return true; });
      const std::int64_t j = best_in(c, 1, [k](std::uint32_t u) { return u > k; });
      if (b < 0 && j < 0) return;
      const bool pick_b =
          b >= 0 && (j < 0 || brave(static_cast<std::uint32_t>(b)) >
                                  brave(static_cast<std::uint32_t>(j)));
      if (pick_b) {
        annihilate(k, static_cast<std::uint32_t>(b), t);
        return;
      }
      swap(static_cast<std::uint32_t>(j), k, t);
      k = static_cast<std::uint32_t>(j);
    }
  }

  void procedure_invisible(std::uint32_t k, double t) {
    const std::int32_t c = parts_[k].cell;
    for (std::size_t guard = 0;; ++guard) {
      if (guard > parts_.size()) throw std::logic_error("procedure (ii) did not terminate");
      const std::int64_t j = best_in(c, 0, [k](std::uint32_t u) { return u < k; });
      if (j < 0) return;
      swap(k, static_cast<std::uint32_t>(j), t);
      k = static_cast<std::uint32_t>(j);
    }
  }

  void procedure_b(std::uint32_t b, double t) {
    const std::int64_t n =
        best_in(parts_[b].cell, 0, [](std::uint32_t) { return true; });
    if (n < 0) return;
    annihilate(static_cast<std::uint32_t>(n), b, t);
    procedure_invisible(static_cast<std::uint32_t>(n), t);
  }

  void sample(double t) {
    rec_.sample(t, static_cast<double>(rec_.count()));
    if (!params_.record_fields) return;
    Field raw;
    std::vector<AState> as(num_a_);
    std::vector<SiteId> bs;
    for (std::uint32_t pid = 0; pid < parts_.size(); ++pid) {
      const Particle& a = parts_[pid];
      if (is_a(pid)) {
        as[pid] = {a.alive ? a.site : kEscaped, a.visible};
        if (a.alive && a.visible) raw.emplace_back(a.site, 1);
      } else if (a.alive) {
        raw.emplace_back(a.site, -1);
        bs.push_back(a.site);
      }
    }
    std::sort(bs.begin(), bs.end());
    res_.fields.push_back(collapse_field(std::move(raw)));
    res_.a_states.push_back(std::move(as));
    res_.b_sites.push_back(std::move(bs));
  }

  const SimParams& params_;
  Graph g_;
  CellStore cells_;
  RootRecorder rec_;
  EventQueue queue_;
  bool tracks_on_;
  std::uint32_t num_a_ = 0;
  std::vector<Particle> parts_;
  std::vector<Bundle> bundles_;
  std::vector<std::uint32_t> bundle_of_;
  PathSwapResult res_;
};

inline PathSwapResult run_path_swapping(const SimParams& params,
                                        const Configuration& config,
                                        bool record_tracks = false) {
  return PathSwapEngine(params, config, record_tracks).run();
}

inline PathSwapResult run_path_swapping(const SimParams& params) {
  return run_path_swapping(params, init_configuration(params));
}

// Outcome of a pathwise check: number of violations and the first one.
struct CheckReport {
  std::string check;
  std::int64_t trials = 0;
  std::int64_t failures = 0;
  std::string first_counterexample;

  bool ok() const { return failures == 0; }
  void fail(const std::string& what) {
    if (first_counterexample.empty()) first_counterexample = what;
  }
  void merge(const CheckReport& o) {
    trials += o.trials;
    failures += o.failures;
    if (first_counterexample.empty()) first_counterexample = o.first_counterexample;
  }
};

// Compares the A-particles numbered above n (visible, invisible) with the
// difference between the full system and the system without them.
inline CheckReport check_change_tracking(const SimParams& params,
                                         const Configuration& config,
                                         std::size_t n) {
  SimParams p = params;
  p.record_fields = true;
  CheckReport rep{"change-track", 1, 0, {}};
  Configuration reduced;
  std::size_t seen = 0;
  for (const auto& q : config) {
    if (q.kind == Kind::kA && ++seen > n) continue;
    reduced.push_back(q);
  }
  const auto full = run_path_swapping(p, config);
  const auto part = run_path_swapping(p, reduced);
  const Graph g(params.graph);
  bool bad = false;
  for (std::size_t s = 0; s < p.sample_times.size() && !bad; ++s) {
    // per site: visA, B, high visible, high invisible (full); visA, B (reduced)
    std::map<SiteId, std::array<std::int64_t, 6>> c;
    const auto& fa = full.a_states[s];
    for (std::size_t i = 0; i < fa.size(); ++i) {
      if (fa[i].site == kEscaped) continue;
      auto& e = c[fa[i].site];
      if (fa[i].visible) ++e[0];
      if (i >= n) ++e[fa[i].visible ? 2 : 3];
    }
    for (SiteId b : full.b_sites[s]) ++c[b][1];
    const auto& pa = part.a_states[s];
    for (std::size_t i = 0; i < pa.size(); ++i) {
      if (pa[i].site != kEscaped && pa[i].visible) ++c[pa[i].site][4];
      if (i < fa.size() && (pa[i].site != fa[i].site || pa[i].visible != fa[i].visible)) {
        std::ostringstream os;
        os << "t=" << p.sample_times[s] << " a_" << i + 1
           << " differs after deleting higher-numbered particles";
        rep.fail(os.str());
        bad = true;
      }
    }
    for (SiteId b : part.b_sites[s]) ++c[b][5];
    for (const auto& [site, e] : c) {
      const bool ok_a = e[0] - e[4] == e[2];
      const bool ok_b = e[5] - e[1] == e[3];
      const bool ok_all = (e[0] - e[1]) - (e[4] - e[5]) == e[2] + e[3];
      if (!(ok_a && ok_b && ok_all)) {
        std::ostringstream os;
        os << "t=" << p.sample_times[s] << " site=" << g.site_name(site)
           << " visA=" << e[0] << "/" << e[4] << " B=" << e[1] << "/" << e[5]
           << " high vis/invis=" << e[2] << "/" << e[3];
        rep.fail(os.str());
        bad = true;
        break;
      }
    }
  }
  rep.failures = bad ? 1 : 0;
  return rep;
}

// ---------------------------------------------------------------------------
// Sequential process (stationary B-particles)
// ---------------------------------------------------------------------------

enum class HaltCause : std::uint8_t { kHitB, kTimeUp, kStepCap, kEscaped };

inline const char* halt_name(HaltCause h) {
  switch (h) {
    case HaltCause::kHitB: return "hit_b";
    case HaltCause::kTimeUp: return "time_up";
    case HaltCause::kStepCap: return "step_cap";
    case HaltCause::kEscaped: return "escaped";
  }
  return "?";
}

struct SequentialParticle {
  std::size_t config_index = 0;
  SiteId start = 0;
  HaltCause cause = HaltCause::kTimeUp;
  double halt_time = 0;     // own time
  double root_time = 0;     // occupation of the root
  bool visited_root = false;
  std::uint64_t steps = 0;
  std::uint32_t chunks = 0;  // coupled runs only
  bool extended = false;     // coupled runs only
};

struct SequentialRun {
  std::vector<SequentialParticle> particles;  // A-particles in release order
  std::vector<SiteId> surviving_b;
  double v_total = 0;
  std::int64_t censored = 0;
  std::int64_t extensions = 0;       // coupled: chunks exhausted before time t
  std::int64_t midchunk_hits = 0;    // coupled: surviving B met inside a chunk
  std::int64_t continuations = 0;    // coupled: chunk end without a surviving B
};

struct SequentialOptions {
  std::uint64_t step_cap = 10'000'000;
  // Line only: every site >= this bound outside the release region carries a
  // particle whose type is drawn from the site-keyed stream; its B-particles
  // join the landscape but its A-particles are never released.
  std::optional<SiteId> lazy_landscape_from;
};

namespace detail {

// Surviving stationary B-particles.
class Landscape {
 public:
  Landscape(const SimParams& params, const Configuration& config,
            std::optional<SiteId> lazy_from)
      : seed_(params.seed), p_(params.p), lazy_from_(lazy_from) {
    for (const auto& q : config) {
      occupied_.insert(q.site);
      if (q.kind == Kind::kB) b_.insert(q.site);
    }
  }
  bool has_b(SiteId s) {
    if (b_.count(s)) return true;
    if (!lazy_from_ || s < *lazy_from_ || occupied_.count(s) || killed_.count(s))
      return false;
    Rng r(derive_seed(seed_, {tag::kType, static_cast<std::uint64_t>(s)}));
    return !(r.uniform() < p_);
  }
  void kill(SiteId s) {
    if (!b_.erase(s)) killed_.insert(s);
  }
  std::vector<SiteId> survivors() const {
    std::vector<SiteId> v(b_.begin(), b_.end());
    std::sort(v.begin(), v.end());
    return v;
  }

 private:
  std::uint64_t seed_;
  double p_;
  std::optional<SiteId> lazy_from_;
  std::unordered_set<SiteId> b_, occupied_, killed_;
};

// Walks one particle along a stream from own time t0 at site x until it
// lands on a surviving B, own time exceeds the horizon, or the cap is hit.
inline void walk_fresh(const Graph& g, Landscape& land, PathStream& stream,
                       double horizon, std::uint64_t step_cap,
                       SequentialParticle& rec, SiteId& x, double t0) {
  const std::uint32_t choices = g.num_choices();
  double arrived = t0;
  while (true) {
    const double tn = stream.next_time();
    if (tn > horizon) {
      if (x == g.root()) rec.root_time += horizon - arrived;
      rec.cause = HaltCause::kTimeUp;
      rec.halt_time = horizon;
      return;
    }
    if (rec.steps >= step_cap) {
      rec.cause = HaltCause::kStepCap;
      rec.halt_time = tn;
      return;
    }
    if (x == g.root()) rec.root_time += tn - arrived;
    x = g.step(x, stream.take(choices));
    ++rec.steps;
    arrived = tn;
    if (x == kEscaped) {
      rec.cause = HaltCause::kEscaped;
      rec.halt_time = tn;
      return;
    }
    if (x == g.root()) rec.visited_root = true;
    if (land.has_b(x)) {
      land.kill(x);
      rec.cause = HaltCause::kHitB;
      rec.halt_time = tn;
      return;
    }
  }
}

}  // namespace detail

// Releases the A-particles one at a time in configuration order; each runs
// on its own path until it meets a surviving B-particle, its own clock passes
// the horizon, or the step cap is reached.
inline SequentialRun run_sequential(const SimParams& params,
                                    const Configuration& config,
                                    const SequentialOptions& opt = {}) {
  if (params.lambda_b != 0)
    throw std::invalid_argument("the sequential process needs lambda_b = 0");
  if (!(params.lambda_a > 0)) throw std::invalid_argument("lambda_a must be positive");
  if (std::isinf(params.horizon) && opt.step_cap == 0)
    throw std::invalid_argument("infinite horizon needs a finite step cap");
  const Graph g(params.graph);
  detail::Landscape land(params, config, opt.lazy_landscape_from);
  SequentialRun run;
  for (std::size_t i = 0; i < config.size(); ++i) {
    const auto& q = config[i];
    if (q.kind != Kind::kA) continue;
    SequentialParticle rec;
    rec.config_index = i;
    rec.start = q.site;
    rec.visited_root = q.site == g.root();
    PathStream stream(particle_key(params.seed, q, tag::kPath), params.lambda_a);
    SiteId x = q.site;
    detail::walk_fresh(g, land, stream, params.horizon, opt.step_cap, rec, x, 0.0);
    if (rec.cause == HaltCause::kStepCap) ++run.censored;
    run.v_total += rec.root_time;
    run.particles.push_back(rec);
  }
  run.surviving_b = land.survivors();
  return run;
}

inline SequentialRun run_sequential(const SimParams& params,
                                    const SequentialOptions& opt = {}) {
  return run_sequential(params, init_configuration(params), opt);
}

struct CoupledSequential {
  SequentialRun sequential;
  double v_dlas = 0;  // V_t of the path-swapping (equivalently CRS) run
};

// Builds the sequential process from the visible pieces of the path-swapping
// trajectories: particle n follows the concatenated visible pieces of a_n,
// halting at the end of a piece that sits on a surviving B-particle. When the
// pieces recorded up to the horizon run out before its own clock reaches the
// horizon, it continues on a fresh extension stream.
inline CoupledSequential run_sequential_coupled(const SimParams& params,
                                                const Configuration& config,
                                                const SequentialOptions& opt = {}) {
  if (params.lambda_b != 0)
    throw std::invalid_argument("the sequential process needs lambda_b = 0");
  if (std::isinf(params.horizon))
    throw std::invalid_argument("the coupled construction needs a finite horizon");
  const Graph g(params.graph);
  const double t = params.horizon;
  const auto ps = run_path_swapping(params, config, /*record_tracks=*/true);
  detail::Landscape land(params, config, std::nullopt);
  CoupledSequential out;
  out.v_dlas = ps.obs.v_final;
  SequentialRun& run = out.sequential;
  const SiteId root = g.root();

  for (std::size_t n = 0; n < ps.tracks.size(); ++n) {
    const auto& tr = ps.tracks[n];
    const auto& q = config[ps.a_config_index[n]];
    SequentialParticle rec;
    rec.config_index = ps.a_config_index[n];
    rec.start = q.site;
    rec.visited_root = q.site == root;
    SiteId x = q.site;
    double own = 0;          // own clock at the current real time
    double real_mark = 0;    // real time matching `own` while visible
    double arrived = 0;      // own time of arrival at x
    bool visible = true;
    bool halted = false;
    rec.chunks = 1;

    auto leave_root = [&](double own_now) {
      if (x == root) rec.root_time += std::min(own_now, t) - arrived;
    };

    for (std::size_t k = 1; k < tr.size() && !halted; ++k) {
      const TrackPoint& pt = tr[k];
      if (visible) {
        const double own_now = own + (pt.time - real_mark);
        if (pt.site != x) {
          // a move made while visible
          if (own_now > t) break;
          leave_root(own_now);
          x = pt.site;
          arrived = own_now;
          ++rec.steps;
          if (x == kEscaped) {
            rec.cause = HaltCause::kEscaped;
            rec.halt_time = own_now;
            halted = true;
            break;
          }
          if (x == root) rec.visited_root = true;
          const bool chunk_end = k + 1 < tr.size() && tr[k + 1].time == pt.time &&
                                 !tr[k + 1].visible && tr[k + 1].site == x;
          if (land.has_b(x)) {
            if (!chunk_end) ++run.midchunk_hits;
            land.kill(x);
            rec.cause = HaltCause::kHitB;
            rec.halt_time = own_now;
            halted = true;
            break;
          }
        }
        if (!pt.visible) {
          own = own_now;
          visible = false;
        }
      } else if (pt.visible) {
        // a_n is visible again at the same site: the next chunk starts
        real_mark = pt.time;
        visible = true;
        ++rec.chunks;
        ++run.continuations;
      }
    }
    if (!halted) {
      const double own_end = visible ? own + (t - real_mark) : own;
      if (own_end >= t) {
        leave_root(t);
        rec.cause = HaltCause::kTimeUp;
        rec.halt_time = t;
      } else {
        // Pieces exhausted: continue on a fresh walk from x. The current stay
        // at x (since `arrived`) has not been counted yet.
        ++run.extensions;
        rec.extended = true;
        PathStream ext(particle_key(params.seed, q, tag::kExtension), params.lambda_a);
        ext.delay(own_end);
        detail::walk_fresh(g, land, ext, t, opt.step_cap, rec, x, arrived);
      }
    }
    if (rec.cause == HaltCause::kStepCap) ++run.censored;
    run.v_total += rec.root_time;
    run.particles.push_back(rec);
  }
  run.surviving_b = land.survivors();
  return out;
}

// ---------------------------------------------------------------------------
// Polarized construction (stationary B-particles)
// ---------------------------------------------------------------------------

enum class PolarityRule { kAllPositive, kRandom, kSignOfFirstCoordinate };

struct PolarizedResult {
  ObservableSeries obs;
  std::vector<Field> fields;
  RunResult positive, negative;
  std::vector<std::int8_t> polarity;  // per configuration index, +1 / -1
  double v_positive = 0, v_negative = 0;
  std::int64_t invariant_violations = 0;
  std::uint64_t events = 0;
};

inline std::vector<std::int8_t> assign_polarity(const SimParams& params,
                                                const Configuration& config,
                                                PolarityRule rule) {
  const Graph g(params.graph);
  std::vector<std::int8_t> pol(config.size(), 1);
  for (std::size_t i = 0; i < config.size(); ++i) {
    switch (rule) {
      case PolarityRule::kAllPositive: break;
      case PolarityRule::kRandom:
        pol[i] = Rng(particle_key(params.seed, config[i], tag::kPolarity)).uniform() < 0.5
                     ? 1 : -1;
        break;
      case PolarityRule::kSignOfFirstCoordinate:
        pol[i] = g.is_tree() || g.coord(config[i].site, 0) >= 0 ? 1 : -1;
        break;
    }
  }
  return pol;
}

class PolarizedEngine {
 public:
  PolarizedEngine(const SimParams& params, const Configuration& config,
                  std::vector<std::int8_t> polarity)
      : params_(params), config_(config), g_(params.graph),
        rec_(params, config.size()) {
    params.validate();
    if (params.lambda_b != 0)
      throw std::invalid_argument("the polarized construction needs lambda_b = 0");
    if (polarity.size() != config.size())
      throw std::invalid_argument("polarity must cover every particle");
    res_.polarity = std::move(polarity);
  }

  PolarizedResult run() {
    run_signed_processes();
    const std::size_t n = config_.size();
    parts_.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto& q = config_[i];
      Particle& a = parts_[i];
      a.kind = q.kind;
      a.site = q.site;
      if (q.kind == Kind::kB) {
        sites_[q.site] = {static_cast<std::int32_t>(i), -1, res_.polarity[i]};
        continue;
      }
      a.stream = PathStream(particle_key(params_.seed, q, tag::kPath), params_.lambda_a);
      visible_at_[q.site] += 1;
      if (q.site == g_.root()) rec_.arrive(i, 0.0);
      queue_.push(a.stream.next_time(), i, 0);
    }
    const auto& times = params_.sample_times;
    std::size_t ns = 0;
    const std::uint32_t choices = g_.num_choices();
    while (!queue_.empty()) {
      const auto ev = queue_.top();
      if (ev.time > params_.horizon) break;
      queue_.pop();
      Particle& a = parts_[ev.pid];
      if (!a.alive || !a.visible || ev.version != a.version) continue;
      const double t = ev.time;
      while (ns < times.size() && times[ns] < t) sample(times[ns++]);
      ++res_.events;
      const SiteId from = a.site;
      const SiteId to = g_.step(from, a.stream.take(choices));
      dec_visible(from, ev.pid, t);
      if (to == kEscaped) {
        a.alive = false;
        continue;
      }
      a.site = to;
      inc_visible(to, ev.pid, t);
      interact(ev.pid, t);
      if (a.visible) {
        ++a.version;
        queue_.push(a.stream.next_time(), ev.pid, a.version);
      }
    }
    while (ns < times.size()) sample(times[ns++]);
    rec_.finish(params_.horizon);
    res_.obs = std::move(rec_.obs());
    return std::move(res_);
  }

 private:
  struct Particle {
    Kind kind = Kind::kA;
    bool alive = true;
    bool visible = true;
    SiteId site = 0;
    double paused_at = 0;
    std::uint32_t version = 0;
    PathStream stream;
  };
  // State of a site that initially held a B-particle.
  struct BSite {
    std::int32_t b = -1;          // live B-particle, or -1
    std::int32_t invisible = -1;  // invisible A-particle, or -1
    std::int8_t b_polarity = 1;   // polarity of the initial B-particle
  };

  void run_signed_processes() {
    SimParams p = params_;
    p.record_fields = false;
    p.record_visits = false;
    for (int sign : {1, -1}) {
      Configuration sub;
      std::vector<std::uint32_t> idx;
      for (std::uint32_t i = 0; i < config_.size(); ++i)
        if (res_.polarity[i] == sign) {
          sub.push_back(config_[i]);
          idx.push_back(i);
        }
      RunResult r = run_crs(p, sub);
      // First arrival times at initial-B sites, by replaying each A path up
      // to its death (or the horizon).
      std::unordered_set<SiteId> bsites;
      for (const auto& q : sub)
        if (q.kind == Kind::kB) bsites.insert(q.site);
      for (std::size_t k = 0; k < sub.size(); ++k) {
        if (sub[k].kind != Kind::kA) continue;
        const double end = std::min(r.death_time[k], params_.horizon);
        PathStream s(particle_key(params_.seed, sub[k], tag::kPath), params_.lambda_a);
        SiteId x = sub[k].site;
        while (s.next_time() <= end) {
          const double tn = s.next_time();
          x = g_.step(x, s.take(g_.num_choices()));
          if (x == kEscaped) break;
          if (bsites.count(x)) first_arrival_.try_emplace(key(idx[k], x), tn);
        }
      }
      (sign == 1 ? res_.v_positive : res_.v_negative) = r.obs.v_final;
      (sign == 1 ? res_.positive : res_.negative) = std::move(r);
    }
  }

  static std::uint64_t key(std::uint32_t pid, SiteId s) {
    return mix64(static_cast<std::uint64_t>(s)) ^ (static_cast<std::uint64_t>(pid) * 0x9e3779b97f4a7c15ULL);
  }
  double first_arrival(std::uint32_t pid, SiteId s) const {
    auto it = first_arrival_.find(key(pid, s));
    return it == first_arrival_.end() ? kInf : it->second;
  }

  void inc_visible(SiteId s, std::uint32_t pid, double t) {
    ++visible_at_[s];
    if (s == g_.root()) rec_.arrive(pid, t);
  }
  void dec_visible(SiteId s, std::uint32_t pid, double t) {
    if (--visible_at_[s] == 0) visible_at_.erase(s);
    if (s == g_.root()) rec_.leave(pid, t);
  }

  void pause(std::uint32_t i, double t) {
    Particle& a = parts_[i];
    dec_visible(a.site, i, t);
    a.visible = false;
    a.paused_at = t;
    ++a.version;
  }
  void resume(std::uint32_t i, double t) {
    Particle& a = parts_[i];
    a.visible = true;
    a.stream.delay(t - a.paused_at);
    inc_visible(a.site, i, t);
    ++a.version;
    queue_.push(a.stream.next_time(), i, a.version);
  }

  // A visible A-particle i has just arrived at its site.
  void interact(std::uint32_t i, double t) {
    auto it = sites_.find(parts_[i].site);
    if (it == sites_.end()) return;  // never held a B-particle
    BSite& s = it->second;
    if ((s.b >= 0) == (s.invisible >= 0)) ++res_.invariant_violations;
    if (s.b >= 0) {
      parts_[s.b].alive = false;
      s.b = -1;
      s.invisible = static_cast<std::int32_t>(i);
      pause(i, t);
      return;
    }
    if (s.invisible < 0) return;
    const auto j = static_cast<std::uint32_t>(s.invisible);
    const std::int8_t pi = res_.polarity[i], pj = res_.polarity[j];
    std::uint32_t hide = j;
    if (pi != pj) {
      hide = pi == s.b_polarity ? i : j;
    } else {
      const double ai = first_arrival(i, parts_[i].site);
      const double aj = first_arrival(j, parts_[i].site);
      if (ai < aj) hide = i;  // equal (both never): keep the current state
    }
    if (hide == i) {
      pause(i, t);
      s.invisible = static_cast<std::int32_t>(i);
      resume(j, t);
    }
  }

  void sample(double t) {
    rec_.sample(t, static_cast<double>(rec_.count()));
    if (!params_.record_fields) return;
    Field raw;
    for (const auto& a : parts_) {
      if (!a.alive) continue;
      if (a.kind == Kind::kB) raw.emplace_back(a.site, -1);
      else if (a.visible) raw.emplace_back(a.site, 1);
    }
    res_.fields.push_back(collapse_field(std::move(raw)));
  }

  const SimParams& params_;
  const Configuration& config_;
  Graph g_;
  RootRecorder rec_;
  EventQueue queue_;
  std::vector<Particle> parts_;
  std::unordered_map<SiteId, BSite> sites_;
  std::unordered_map<SiteId, std::int32_t> visible_at_;
  std::unordered_map<std::uint64_t, double> first_arrival_;
  PolarizedResult res_;
};

inline PolarizedResult run_polarized(const SimParams& params,
                                     const Configuration& config,
                                     std::vector<std::int8_t> polarity) {
  return PolarizedEngine(params, config, std::move(polarity)).run();
}

// ---------------------------------------------------------------------------
// Monotonicity
// ---------------------------------------------------------------------------

// zeta' starts from zeta with B-particles removed at removed_b and
// A-particles added at added_a (a B-particle on such a site is removed too).
inline Configuration raise_configuration(const Configuration& config,
                                         const std::vector<SiteId>& added_a,
                                         const std::vector<SiteId>& removed_b) {
  std::unordered_set<SiteId> add(added_a.begin(), added_a.end());
  std::unordered_set<SiteId> rem(removed_b.begin(), removed_b.end());
  Configuration out;
  std::unordered_set<SiteId> has_a;
  for (const auto& q : config) {
    if (q.kind == Kind::kB && (rem.count(q.site) || add.count(q.site))) continue;
    if (q.kind == Kind::kA) has_a.insert(q.site);
    out.push_back(q);
  }
  for (SiteId s : added_a) {
    if (has_a.count(s))
      throw std::invalid_argument("added A-particle on a site that already holds one");
    out.push_back({s, Kind::kA, 0});
  }
  return out;
}

inline CheckReport check_monotonicity(const SimParams& params,
                                      const Configuration& config,
                                      const std::vector<SiteId>& added_a,
                                      const std::vector<SiteId>& removed_b) {
  SimParams p = params;
  p.record_fields = true;
  CheckReport rep{"monotone", 1, 0, {}};
  const Configuration raised = raise_configuration(config, added_a, removed_b);
  const RunResult lo = run_crs(p, config);
  const RunResult hi = run_crs(p, raised);
  const Graph g(params.graph);
  bool bad = false;
  for (std::size_t s = 0; s < p.sample_times.size() && !bad; ++s) {
    std::map<SiteId, std::pair<std::int32_t, std::int32_t>> z;
    for (const auto& [site, v] : lo.fields[s]) z[site].first = v;
    for (const auto& [site, v] : hi.fields[s]) z[site].second = v;
    for (const auto& [site, v] : z)
      if (v.first > v.second) {
        std::ostringstream os;
        os << "t=" << p.sample_times[s] << " site=" << g.site_name(site)
           << " zeta=" << v.first << " zeta'=" << v.second;
        rep.fail(os.str());
        bad = true;
        break;
      }
  }
  // Lifespans of particles present in both systems.
  std::map<std::tuple<SiteId, int, std::uint32_t>, std::size_t> where;
  for (std::size_t i = 0; i < raised.size(); ++i)
    where[{raised[i].site, static_cast<int>(raised[i].kind), raised[i].copy}] = i;
  for (std::size_t i = 0; i < config.size() && !bad; ++i) {
    auto it = where.find({config[i].site, static_cast<int>(config[i].kind), config[i].copy});
    if (it == where.end()) continue;
    const double d0 = lo.death_time[i], d1 = hi.death_time[it->second];
    const bool ok = config[i].kind == Kind::kA ? d1 >= d0 : d1 <= d0;
    if (!ok) {
      std::ostringstream os;
      os << (config[i].kind == Kind::kA ? "A" : "B") << " from "
         << g.site_name(config[i].site) << " lifespan " << d0 << " -> " << d1;
      rep.fail(os.str());
      bad = true;
    }
  }
  rep.failures = bad ? 1 : 0;
  return rep;
}

}  // namespace annihilate

#endif  // ANNIHILATE_COUPLINGS_HPP_
