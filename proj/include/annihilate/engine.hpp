// Event-driven continuous-time simulation of the two-type diffusion-limited
// annihilating system with the braveness rule for multi-particle sites.

#ifndef ANNIHILATE_ENGINE_HPP_
#define ANNIHILATE_ENGINE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "annihilate/graphs.hpp"
#include "annihilate/random.hpp"

namespace annihilate {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Kind : std::uint8_t { kA = 0, kB = 1 };

inline Kind opposite(Kind k) { return k == Kind::kA ? Kind::kB : Kind::kA; }

// Finite set of initial sites. Either a ball {min_radius <= |v| <= radius}
// or an explicit list (already in the desired particle order).
struct Region {
  std::int64_t radius = 0;
  std::int64_t min_radius = 0;
  std::vector<SiteId> explicit_sites;

  static Region Ball(std::int64_t r) { return {r, 0, {}}; }
  static Region Shell(std::int64_t lo, std::int64_t hi) { return {hi, lo, {}}; }
  static Region Sites(std::vector<SiteId> s) { return {0, 0, std::move(s)}; }
  // Integers a..b on the line, in distance-then-lexicographic order.
  static Region Interval(std::int64_t a, std::int64_t b) {
    std::vector<SiteId> s;
    for (std::int64_t x = a; x <= b; ++x) s.push_back(x);
    std::stable_sort(s.begin(), s.end(), [](SiteId u, SiteId v) {
      const auto au = u < 0 ? -u : u, av = v < 0 ? -v : v;
      return au != av ? au < av : u < v;
    });
    return Sites(std::move(s));
  }

  std::vector<SiteId> sites(const Graph& g) const {
    if (!explicit_sites.empty()) return explicit_sites;
    return g.sites_within(radius, min_radius);
  }
  // Upper bound on the distance of any region site from the root.
  std::int64_t extent(const Graph& g) const {
    if (explicit_sites.empty()) return radius;
    std::int64_t m = 0;
    for (SiteId s : explicit_sites) m = std::max(m, g.distance_to_root(s));
    return m;
  }
};

struct SimParams {
  GraphSpec graph = GraphSpec::Line();
  Region region;
  double p = 0.5;
  double lambda_a = 1.0;
  double lambda_b = 1.0;
  double horizon = 1.0;  // may be kInf
  std::uint64_t seed = 0;
  std::vector<double> sample_times;

  // Optional outputs.
  bool record_fields = false;   // signed counts at every sample time
  bool record_visits = false;   // per-particle root visit log
  std::int64_t density_window = -1;  // >= 0: average N over sites within this distance

  void validate() const {
    if (!(p >= 0 && p <= 1)) throw std::invalid_argument("p must lie in [0,1]");
    if (lambda_a < 0 || lambda_b < 0) throw std::invalid_argument("negative rate");
    if (lambda_a == 0 && lambda_b == 0)
      throw std::invalid_argument("both rates are zero");
    if (!(horizon > 0)) throw std::invalid_argument("horizon must be positive");
    for (std::size_t i = 0; i < sample_times.size(); ++i) {
      const double s = sample_times[i];
      if (!(s >= 0 && s <= horizon) || std::isinf(s))
        throw std::invalid_argument("sample time outside [0, horizon]");
      if (i && !(sample_times[i - 1] < s))
        throw std::invalid_argument("sample times must be strictly increasing");
    }
  }
};

struct InitialParticle {
  SiteId site;
  Kind kind;
  std::uint32_t copy = 0;  // distinguishes several same-kind particles on a site
};

// Initial particles in particle-number order.
using Configuration = std::vector<InitialParticle>;

// One particle per region site; A with probability p. Types are keyed by
// (seed, site) so nested regions share their common sites.
inline Configuration init_configuration(const SimParams& params) {
  const Graph g(params.graph);
  if (!g.is_tree() && params.graph.kind != GraphKind::kTorus &&
      params.region.explicit_sites.empty() && params.region.radius < 0)
    throw std::invalid_argument("region must be finite");
  Configuration c;
  for (SiteId s : params.region.sites(g)) {
    Rng r(derive_seed(params.seed, {tag::kType, static_cast<std::uint64_t>(s)}));
    c.push_back({s, r.uniform() < params.p ? Kind::kA : Kind::kB, 0});
  }
  return c;
}

// D(H): #A - #B initially placed on the given sites.
inline std::int64_t discrepancy(const Configuration& config,
                                const std::vector<SiteId>& region) {
  std::vector<SiteId> sorted(region);
  std::sort(sorted.begin(), sorted.end());
  std::int64_t d = 0;
  for (const auto& q : config)
    if (std::binary_search(sorted.begin(), sorted.end(), q.site))
      d += q.kind == Kind::kA ? 1 : -1;
  return d;
}

inline std::uint64_t particle_key(std::uint64_t seed, const InitialParticle& q,
                                  std::uint64_t what) {
  return derive_seed(seed, {what, static_cast<std::uint64_t>(q.site),
                            static_cast<std::uint64_t>(q.kind), q.copy});
}

// Lazy putative trajectory: jump times on an absolute clock plus kernel
// choices. The pair (next_time, rng state) is the unread remainder of the
// path, so exchanging two streams exchanges path remainders.
class PathStream {
 public:
  PathStream() = default;
  PathStream(std::uint64_t key, double rate) : rng_(key), rate_(rate) {
    next_time_ = rate > 0 ? rng_.exponential(rate) : kInf;
  }
  double next_time() const { return next_time_; }
  double rate() const { return rate_; }
  std::uint64_t steps() const { return steps_; }

  // Consumes the pending jump and returns its kernel choice.
  std::uint32_t take(std::uint32_t choices) {
    const std::uint32_t c = rng_.below(choices);
    next_time_ += rng_.exponential(rate_);
    ++steps_;
    return c;
  }

  // Shift the clock by dt (used when a paused particle resumes).
  void delay(double dt) { next_time_ += dt; }

 private:
  Rng rng_;
  double rate_ = 0;
  double next_time_ = kInf;
  std::uint64_t steps_ = 0;
};

inline double braveness_of(std::uint64_t seed, const InitialParticle& q) {
  return Rng(particle_key(seed, q, tag::kBraveness)).uniform();
}

// Site -> cell map with intrusive per-cell particle lists. Each cell keeps a
// few independent lists (A, invisible A, B); a particle lives in at most one.
class CellStore {
 public:
  static constexpr int kLists = 3;
  static constexpr std::int32_t kNil = -1;

  struct Cell {
    std::int32_t head[kLists] = {kNil, kNil, kNil};
    std::int32_t count[kLists] = {0, 0, 0};
  };

  CellStore(const Graph& g, std::int64_t dense_radius, std::size_t nparticles)
      : g_(g), next_(nparticles, kNil), prev_(nparticles, kNil) {
    if (g.is_tree()) {
      dense_size_ = static_cast<std::size_t>(g.level_start(g.spec().n + 1));
    } else {
      const auto& spec = g.spec();
      if (spec.kind == GraphKind::kTorus) {
        lo_ = -spec.r + 1;
        width_ = 2LL * spec.r;
      } else {
        lo_ = -dense_radius;
        width_ = 2 * dense_radius + 1;
      }
      long double sz = 1;
      for (int i = 0; i < g.dim(); ++i) sz *= width_;
      if (sz > 5e7L) throw std::invalid_argument("dense window too large");
      dense_size_ = static_cast<std::size_t>(sz);
    }
    cells_.resize(dense_size_);
  }

  // Returns the cell index of a live site, creating overflow cells on demand.
  std::int32_t cell(SiteId s) {
    const std::int64_t k = dense_index(s);
    if (k >= 0) return static_cast<std::int32_t>(k);
    auto [it, inserted] = overflow_.try_emplace(s, static_cast<std::int32_t>(cells_.size()));
    if (inserted) {
      cells_.emplace_back();
      overflow_sites_.push_back(s);
    }
    return it->second;
  }

  // Read-only lookup; -1 if the site never held a particle.
  std::int32_t find(SiteId s) const {
    const std::int64_t k = dense_index(s);
    if (k >= 0) return static_cast<std::int32_t>(k);
    auto it = overflow_.find(s);
    return it == overflow_.end() ? kNil : it->second;
  }

  SiteId site_of(std::int32_t c) const {
    if (static_cast<std::size_t>(c) >= dense_size_)
      return overflow_sites_[c - dense_size_];
    if (g_.is_tree()) return c;
    const int dim = g_.dim();
    std::int64_t rem = c;
    std::vector<std::int64_t> x(dim);
    for (int i = 0; i < dim; ++i) {
      x[i] = rem % width_ + lo_;
      rem /= width_;
    }
    return g_.site_at(x);
  }

  std::size_t num_cells() const { return cells_.size(); }

  void insert(std::int32_t c, int list, std::uint32_t pid) {
    Cell& cell = cells_[c];
    next_[pid] = cell.head[list];
    prev_[pid] = kNil;
    if (cell.head[list] != kNil) prev_[cell.head[list]] = static_cast<std::int32_t>(pid);
    cell.head[list] = static_cast<std::int32_t>(pid);
    ++cell.count[list];
  }

  void erase(std::int32_t c, int list, std::uint32_t pid) {
    Cell& cell = cells_[c];
    const std::int32_t nx = next_[pid], pv = prev_[pid];
    if (pv != kNil) next_[pv] = nx;
    else cell.head[list] = nx;
    if (nx != kNil) prev_[nx] = pv;
    next_[pid] = prev_[pid] = kNil;
    --cell.count[list];
  }

  std::int32_t count(std::int32_t c, int list) const { return cells_[c].count[list]; }
  std::int32_t head(std::int32_t c, int list) const { return cells_[c].head[list]; }
  std::int32_t next(std::uint32_t pid) const { return next_[pid]; }

 private:
  std::int64_t dense_index(SiteId s) const {
    if (g_.is_tree())
      return (s >= 0 && static_cast<std::size_t>(s) < dense_size_) ? s : -1;
    std::int64_t idx = 0, mult = 1;
    for (int i = 0; i < g_.dim(); ++i) {
      const std::int64_t off = g_.coord(s, i) - lo_;
      if (off < 0 || off >= width_) return -1;
      idx += off * mult;
      mult *= width_;
    }
    return idx;
  }

  const Graph& g_;
  std::int64_t lo_ = 0, width_ = 1;
  std::size_t dense_size_ = 0;
  std::vector<Cell> cells_;
  std::unordered_map<SiteId, std::int32_t> overflow_;
  std::vector<SiteId> overflow_sites_;
  std::vector<std::int32_t> next_, prev_;
};

// Min-heap of (time, particle, version) with lazy invalidation. Equal times
// pop in particle order.
class EventQueue {
 public:
  struct Event {
    double time;
    std::uint32_t pid;
    std::uint32_t version;
  };
  void push(double t, std::uint32_t pid, std::uint32_t version) {
    if (!std::isinf(t)) heap_.push({t, pid, version});
  }
  bool empty() const { return heap_.empty(); }
  const Event& top() const { return heap_.top(); }
  void pop() { heap_.pop(); }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.pid > b.pid;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
};

// Signed counts at one sample time, sorted by site, zeros omitted.
using Field = std::vector<std::pair<SiteId, std::int32_t>>;

struct ObservableSeries {
  std::uint64_t seed = 0;
  std::vector<double> times;
  std::vector<double> n_root;  // N_t (window average if requested)
  std::vector<double> v_root;  // V_t
  double v_final = 0;          // V at the horizon (or total, if infinite)
  std::int64_t root_visitors = 0;  // distinct A-particles ever at the root
  std::vector<double> first_visit;  // per particle, kInf if never
  std::vector<double> occupancy;    // per particle total root time
};

struct RunResult {
  ObservableSeries obs;
  std::vector<Field> fields;        // one per sample time, if recorded
  std::vector<double> death_time;   // kInf if alive at the horizon
  std::vector<double> escape_time;  // tree walkers leaving the subtree
  std::uint64_t events = 0;
  std::int64_t a_dead = 0, b_dead = 0;
};

// Bookkeeping shared by every construction: exact root occupation integral,
// sample recording and the per-particle visit log.
class RootRecorder {
 public:
  RootRecorder(const SimParams& params, std::size_t nparticles)
      : visited_(nparticles, 0) {
    obs_.seed = params.seed;
    obs_.times = params.sample_times;
    if (params.record_visits) {
      obs_.first_visit.assign(nparticles, kInf);
      obs_.occupancy.assign(nparticles, 0.0);
      arrived_.assign(nparticles, kInf);
    }
  }

  // The root A-count rises by one at time t.
  void arrive(std::uint32_t pid, double t) {
    integrate(t);
    ++count_;
    if (!visited_[pid]) {
      visited_[pid] = 1;
      ++obs_.root_visitors;
    }
    if (!arrived_.empty()) {
      arrived_[pid] = t;
      if (std::isinf(obs_.first_visit[pid])) obs_.first_visit[pid] = t;
    }
  }

  // The root A-count falls by one at time t (departure or death).
  void leave(std::uint32_t pid, double t) {
    integrate(t);
    --count_;
    if (!arrived_.empty()) {
      obs_.occupancy[pid] += t - arrived_[pid];
      arrived_[pid] = kInf;
    }
  }

  std::int64_t count() const { return count_; }
  double v_at(double t) const {
    return count_ ? v_ + static_cast<double>(count_) * (t - last_) : v_;
  }

  void sample(double t, double n_value) {
    obs_.n_root.push_back(n_value);
    obs_.v_root.push_back(v_at(t));
  }

  void finish(double end) {
    if (std::isinf(end)) {
      obs_.v_final = count_ > 0 ? kInf : v_;
      return;
    }
    obs_.v_final = v_at(end);
    for (std::size_t i = 0; i < arrived_.size(); ++i)
      if (!std::isinf(arrived_[i])) obs_.occupancy[i] += end - arrived_[i];
  }

  ObservableSeries& obs() { return obs_; }

 private:
  void integrate(double t) {
    if (count_) v_ += static_cast<double>(count_) * (t - last_);
    last_ = t;
  }

  ObservableSeries obs_;
  std::vector<std::uint8_t> visited_;
  std::int64_t count_ = 0;
  double v_ = 0, last_ = 0;
  std::vector<double> arrived_;
};

// Radius of the dense cell window for a configuration: twice its extent on
// the line, a thin margin in higher dimensions.
inline std::int64_t dense_radius_for(const Graph& g, const Configuration& config) {
  if (g.is_tree() || g.spec().kind == GraphKind::kTorus) return 0;
  std::int64_t m = 0;
  for (const auto& q : config) {
    if (q.site == kEscaped) throw std::invalid_argument("escaped initial site");
    m = std::max(m, g.distance_to_root(q.site));
  }
  if (g.dim() == 1) return std::min<std::int64_t>(2 * m + 16, 1 << 22);
  return std::min<std::int64_t>(m + 8, g.dim() == 2 ? 2000 : 150);
}

// Sorts (site, delta) pairs and merges equal sites, dropping zeros.
inline Field collapse_field(Field raw) {
  std::sort(raw.begin(), raw.end());
  Field out;
  for (const auto& [s, v] : raw) {
    if (!out.empty() && out.back().first == s) out.back().second += v;
    else out.emplace_back(s, v);
  }
  std::erase_if(out, [](const auto& e) { return e.second == 0; });
  return out;
}

// Braveness-rule simulation: a particle landing on a site with opposite-type
// particles dies together with the bravest of them.
class CrsEngine {
 public:
  CrsEngine(const SimParams& params, const Configuration& config)
      : params_(params), g_(params.graph),
        cells_(g_, dense_radius_for(g_, config), config.size()),
        rec_(params, config.size()) {
    params.validate();
    const std::size_t n = config.size();
    parts_.resize(n);
    result_.death_time.assign(n, kInf);
    result_.escape_time.assign(n, kInf);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& q = config[i];
      Particle& a = parts_[i];
      a.kind = q.kind;
      a.site = q.site;
      a.brave = braveness_of(params.seed, q);
      a.stream = PathStream(particle_key(params.seed, q, tag::kPath),
                            q.kind == Kind::kA ? params.lambda_a : params.lambda_b);
      a.cell = cells_.cell(q.site);
      if (cells_.count(a.cell, list(opposite(a.kind))) > 0)
        throw std::invalid_argument("initial configuration mixes types on a site");
      cells_.insert(a.cell, list(a.kind), static_cast<std::uint32_t>(i));
      if (a.kind == Kind::kA && q.site == g_.root())
        rec_.arrive(static_cast<std::uint32_t>(i), 0.0);
    }
    if (params.density_window >= 0)
      window_ = g_.sites_within(params.density_window);
  }

  RunResult run() {
    const auto& times = params_.sample_times;
    for (std::uint32_t i = 0; i < parts_.size(); ++i)
      queue_.push(parts_[i].stream.next_time(), i, 0);
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
      ++result_.events;
      const SiteId to = g_.step(a.site, a.stream.take(choices));
      detach(ev.pid, t);
      if (to == kEscaped) {
        a.alive = false;
        result_.escape_time[ev.pid] = t;
        continue;
      }
      const std::int32_t c = cells_.cell(to);
      const int olist = list(opposite(a.kind));
      if (cells_.count(c, olist) > 0) {
        const std::uint32_t j = bravest(c, olist);
        a.site = to;
        a.cell = c;
        detach(j, t);
        kill(ev.pid, t);
        kill(j, t);
        continue;
      }
      a.site = to;
      a.cell = c;
      cells_.insert(c, list(a.kind), ev.pid);
      if (a.kind == Kind::kA && to == g_.root()) rec_.arrive(ev.pid, t);
      queue_.push(a.stream.next_time(), ev.pid, a.version);
    }
    while (ns < times.size()) sample(times[ns++]);
    rec_.finish(params_.horizon);
    result_.obs = std::move(rec_.obs());
    return std::move(result_);
  }

 private:
  struct Particle {
    Kind kind = Kind::kA;
    bool alive = true;
    SiteId site = 0;
    std::int32_t cell = 0;
    double brave = 0;
    std::uint32_t version = 0;
    PathStream stream;
  };


  static int list(Kind k) { return k == Kind::kA ? 0 : 2; }

  std::uint32_t bravest(std::int32_t c, int l) const {
    std::int32_t best = cells_.head(c, l);
    for (std::int32_t j = cells_.next(best); j != CellStore::kNil; j = cells_.next(j)) {
      const double bj = parts_[j].brave, bb = parts_[best].brave;
      if (bj > bb || (bj == bb && j < best)) best = j;
    }
    return static_cast<std::uint32_t>(best);
  }

  // Removes a live particle from its cell.
  void detach(std::uint32_t i, double t) {
    Particle& a = parts_[i];
    cells_.erase(a.cell, list(a.kind), i);
    if (a.kind == Kind::kA && a.site == g_.root()) rec_.leave(i, t);
  }

  void kill(std::uint32_t i, double t) {
    Particle& a = parts_[i];
    a.alive = false;
    ++a.version;
    result_.death_time[i] = t;
    ++(a.kind == Kind::kA ? result_.a_dead : result_.b_dead);
  }

  void sample(double t) {
    double n = static_cast<double>(rec_.count());
    if (!window_.empty()) {
      std::int64_t total = 0;
      for (SiteId s : window_) {
        const std::int32_t c = cells_.find(s);
        if (c != CellStore::kNil) total += cells_.count(c, 0);
      }
      n = static_cast<double>(total) / static_cast<double>(window_.size());
    }
    rec_.sample(t, n);
    if (params_.record_fields) {
      Field raw;
      for (const auto& a : parts_)
        if (a.alive) raw.emplace_back(a.site, a.kind == Kind::kA ? 1 : -1);
      result_.fields.push_back(collapse_field(std::move(raw)));
    }
  }

  const SimParams& params_;
  Graph g_;
  CellStore cells_;
  RootRecorder rec_;
  EventQueue queue_;
  std::vector<Particle> parts_;
  std::vector<SiteId> window_;
  RunResult result_;
};

inline RunResult run_crs(const SimParams& params, const Configuration& config) {
  return CrsEngine(params, config).run();
}

inline RunResult run_crs(const SimParams& params) {
  return run_crs(params, init_configuration(params));
}

struct SeriesPoint {
  double t, mean, stderr_;
};

// Replica mean and standard error of N_t at each sample time.
inline std::vector<SeriesPoint> occupation_estimator(
    const std::vector<ObservableSeries>& replicas) {
  if (replicas.size() < 2) throw std::invalid_argument("need at least two replicas");
  const auto& grid = replicas.front().times;
  for (const auto& r : replicas)
    if (r.times != grid || r.n_root.size() != grid.size())
      throw std::invalid_argument("replicas have mismatched sample grids");
  std::vector<SeriesPoint> out;
  const double m = static_cast<double>(replicas.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double sum = 0;
    for (const auto& r : replicas) sum += r.n_root[k];
    const double mean = sum / m;
    double ss = 0;
    for (const auto& r : replicas) ss += (r.n_root[k] - mean) * (r.n_root[k] - mean);
    out.push_back({grid[k], mean, std::sqrt(ss / (m - 1) / m)});
  }
  return out;
}

}  // namespace annihilate

#endif  // ANNIHILATE_ENGINE_HPP_
