// Experiment orchestration: declarative configs, seeded parallel replicas,
// CSV summaries, fits, run manifests and replay.

#ifndef ANNIHILATE_EXPERIMENTS_HPP_
#define ANNIHILATE_EXPERIMENTS_HPP_

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "annihilate/analysis.hpp"
#include "annihilate/couplings.hpp"
#include "annihilate/engine.hpp"
#include "annihilate/graphs.hpp"
#include "annihilate/tree_exact.hpp"
#include "json.hpp"

namespace annihilate {

inline constexpr const char* kCodeVersion = "annihilate-lab 0.1.0";

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  std::string experiment;  // critical_line | subcritical_line | torus_compare | tree
  GraphSpec graph = GraphSpec::Line();
  double p = 0.5;
  std::vector<double> p_grid;
  double lambda_a = 1.0;
  double lambda_b = 0.0;
  std::vector<double> t_grid;
  std::vector<int> n_grid;
  std::vector<double> eps_grid;
  std::int64_t replicas = 100;
  std::uint64_t seed = 1;
  double C = 2.0;
  std::int64_t radius = 0;      // torus_compare: 0 means the truncation radius
  std::int64_t k_max = 0;       // subcritical_line: 0 picks it from p
  std::string sampler = "ruin"; // subcritical_line: ruin | path
  std::uint64_t step_cap = 10'000'000;
  int depth_cap = 14;           // tree: cap on the simulated depth for V_t
  int workers = 0;              // 0: ANNIHILATE_WORKERS or the hardware count
  std::string output;           // CSV path; manifest and fit go alongside

  void validate() const {
    static const char* known[] = {"critical_line", "subcritical_line", "torus_compare", "tree"};
    bool ok = false;
    for (const char* k : known) ok = ok || experiment == k;
    if (!ok) throw std::invalid_argument("unknown experiment '" + experiment + "'");
    if (replicas < 2) throw std::invalid_argument("replicas must be at least 2");
    if (!(p >= 0 && p <= 1)) throw std::invalid_argument("p must lie in [0,1]");
    if (lambda_a < 0 || lambda_b < 0 || (lambda_a == 0 && lambda_b == 0))
      throw std::invalid_argument("bad rates");
    if (!(C > 0)) throw std::invalid_argument("C must be positive");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
      if (!(t_grid[i] > t_grid[i - 1])) throw std::invalid_argument("t_grid must be strictly increasing");
    for (std::size_t i = 1; i < n_grid.size(); ++i)
      if (!(n_grid[i] > n_grid[i - 1])) throw std::invalid_argument("n_grid must be strictly increasing");
    for (double t : t_grid)
      if (!(t >= 2)) throw std::invalid_argument("t_grid values must be at least 2");
    if (experiment == "critical_line" || experiment == "torus_compare") {
      if (graph.is_tree()) throw std::invalid_argument(experiment + " needs a lattice graph");
      if (t_grid.empty()) throw std::invalid_argument(experiment + " needs t_grid");
    }
    if (experiment == "torus_compare" && radius > 0)
      for (double t : t_grid)
        if (static_cast<double>(radius) < std::sqrt(t))
          throw std::invalid_argument("radius must not be set below sqrt(t)");
    if (experiment == "subcritical_line") {
      if (lambda_b != 0) throw std::invalid_argument("subcritical_line needs lambda_b = 0");
      if (p_grid.empty()) throw std::invalid_argument("subcritical_line needs p_grid");
      for (double q : p_grid)
        if (!(q > 0.25 && q < 0.5)) throw std::invalid_argument("p_grid values must lie in (1/4, 1/2)");
      if (sampler != "ruin" && sampler != "path") throw std::invalid_argument("sampler must be ruin or path");
    }
    if (experiment == "tree") {
      if (!graph.is_tree()) throw std::invalid_argument("tree needs a bitree graph");
      if (lambda_b != 0) throw std::invalid_argument("tree needs lambda_b = 0");
      for (double e : eps_grid)
        if (!(e > 0 && e < 0.5)) throw std::invalid_argument("eps_grid values must lie in (0, 1/2)");
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (item.empty()) continue;
    std::size_t used = 0;
    T v;
    if constexpr (std::is_integral_v<T>) v = static_cast<T>(std::stoll(item, &used));
    else v = static_cast<T>(std::stod(item, &used));
    if (used != item.size()) throw std::invalid_argument("bad list entry '" + item + "'");
    out.push_back(v);
  }
  return out;
}

inline double parse_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

inline std::int64_t parse_int(const std::string& s) {
  std::size_t used = 0;
  const long long v = std::stoll(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad integer '" + s + "'");
  return v;
}

}  // namespace detail

inline void set_config_field(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "experiment") c.experiment = value;
  else if (key == "graph") c.graph = GraphSpec::parse(value);
  else if (key == "p") c.p = parse_double(value);
  else if (key == "p_grid") c.p_grid = parse_list<double>(value);
  else if (key == "lambda_a") c.lambda_a = parse_double(value);
  else if (key == "lambda_b") c.lambda_b = parse_double(value);
  else if (key == "t_grid") c.t_grid = parse_list<double>(value);
  else if (key == "n_grid") c.n_grid = parse_list<int>(value);
  else if (key == "eps_grid") c.eps_grid = parse_list<double>(value);
  else if (key == "replicas") c.replicas = parse_int(value);
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(value));
  else if (key == "C") c.C = parse_double(value);
  else if (key == "radius") c.radius = parse_int(value);
  else if (key == "k_max") c.k_max = parse_int(value);
  else if (key == "sampler") c.sampler = value;
  else if (key == "step_cap") c.step_cap = static_cast<std::uint64_t>(parse_int(value));
  else if (key == "depth_cap") c.depth_cap = static_cast<int>(parse_int(value));
  else if (key == "workers") c.workers = static_cast<int>(parse_int(value));
  else if (key == "output") c.output = value;
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

// One "key = value" per line; '#' starts a comment.
inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::stringstream ss(text);
  int line_no = 0;
  for (std::string line; std::getline(ss, line);) {
    ++line_no;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    try {
      set_config_field(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const std::exception& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// Workers do not change results, so they are left out of the echo.
inline Json config_to_json(const ExperimentConfig& c) {
  return Json{{"experiment", c.experiment}, {"graph", c.graph.to_string()},
              {"p", c.p}, {"p_grid", c.p_grid}, {"lambda_a", c.lambda_a},
              {"lambda_b", c.lambda_b}, {"t_grid", c.t_grid}, {"n_grid", c.n_grid},
              {"eps_grid", c.eps_grid}, {"replicas", c.replicas}, {"seed", c.seed},
              {"C", c.C}, {"radius", c.radius}, {"k_max", c.k_max},
              {"sampler", c.sampler}, {"step_cap", c.step_cap}, {"depth_cap", c.depth_cap}};
}

inline ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  c.experiment = j.at("experiment").get<std::string>();
  c.graph = GraphSpec::parse(j.at("graph").get<std::string>());
  c.p = j.at("p").get<double>();
  c.p_grid = j.at("p_grid").get<std::vector<double>>();
  c.lambda_a = j.at("lambda_a").get<double>();
  c.lambda_b = j.at("lambda_b").get<double>();
  c.t_grid = j.at("t_grid").get<std::vector<double>>();
  c.n_grid = j.at("n_grid").get<std::vector<int>>();
  c.eps_grid = j.at("eps_grid").get<std::vector<double>>();
  c.replicas = j.at("replicas").get<std::int64_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.C = j.at("C").get<double>();
  c.radius = j.at("radius").get<std::int64_t>();
  c.k_max = j.at("k_max").get<std::int64_t>();
  c.sampler = j.at("sampler").get<std::string>();
  c.step_cap = j.at("step_cap").get<std::uint64_t>();
  c.depth_cap = j.at("depth_cap").get<int>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Parallel replicas
// ---------------------------------------------------------------------------

inline int resolve_workers(int requested) {
  if (const char* env = std::getenv("ANNIHILATE_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
  if (requested > 0) return requested;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

// Evaluates f(0..n-1) on a pool of workers; results are returned in index
// order, so any fold over them is independent of scheduling.
template <class F>
auto parallel_map(std::size_t n, int workers, F f) -> std::vector<decltype(f(std::size_t{0}))> {
  using R = decltype(f(std::size_t{0}));
  std::vector<R> out(n);
  const int w = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (w == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        out[i] = f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::thread> pool;
  for (int k = 0; k < w; ++k) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

inline std::string fmt_num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : width_(header.size()) { row_strings(header); }

  void row(const std::vector<double>& values) {
    std::vector<std::string> s;
    for (double v : values) s.push_back(fmt_num(v));
    row_strings(s);
  }
  void row_strings(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw std::logic_error("csv row width does not match header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }
  const std::string& text() const { return text_; }

 private:
  std::size_t width_;
  std::string text_;
};

// FNV-1a, printed as 16 hex digits.
inline std::string checksum(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline Json fit_to_json(const FitResult& f) {
  return Json{{"slope", f.slope}, {"intercept", f.intercept}, {"stderr", f.stderr_},
              {"r_squared", f.r_squared}, {"x_min", f.x_min}, {"x_max", f.x_max},
              {"points", f.points}};
}

struct ExperimentResult {
  ExperimentConfig config;
  std::string csv;
  Json fit = Json::object();
  std::vector<std::uint64_t> seeds;
  std::int64_t censored = 0;
  std::vector<std::string> warnings;
  double wall_seconds = 0;

  Json manifest() const {
    return Json{{"code_version", kCodeVersion},
                {"config", config_to_json(config)},
                {"seeds", seeds},
                {"wall_seconds", wall_seconds},
                {"censored", censored},
                {"warnings", warnings},
                {"csv_checksum", checksum(csv)},
                {"fit", fit}};
  }
};

inline std::vector<std::uint64_t> replica_seeds(const ExperimentConfig& c) {
  std::vector<std::uint64_t> s(static_cast<std::size_t>(c.replicas));
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = split_seed(c.seed, i);
  return s;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

// E V_t at the root on a geometric t-grid, one run per replica up to the
// largest t with the truncation radius of that t.
inline ExperimentResult exp_critical_line(const ExperimentConfig& c, int workers) {
  ExperimentResult res;
  res.config = c;
  res.seeds = replica_seeds(c);
  const double t_max = c.t_grid.back();
  const std::int64_t r = truncation_radius(c.graph, t_max, c.C);
  struct Rep {
    std::vector<double> v, n;
  };
  const auto reps = parallel_map(res.seeds.size(), workers, [&](std::size_t i) {
    SimParams s;
    s.graph = c.graph;
    s.region = Region::Ball(r);
    s.p = c.p;
    s.lambda_a = c.lambda_a;
    s.lambda_b = c.lambda_b;
    s.horizon = t_max;
    s.seed = res.seeds[i];
    s.sample_times = c.t_grid;
    const auto out = run_crs(s);
    return Rep{out.obs.v_root, out.obs.n_root};
  });
  CsvWriter csv({"t", "mean_v", "stderr_v", "mean_n", "stderr_n", "replicas", "radius"});
  std::vector<std::pair<double, double>> series;
  for (std::size_t k = 0; k < c.t_grid.size(); ++k) {
    RunningStats v, n;
    for (const auto& rep : reps) {
      v.add(rep.v[k]);
      n.add(rep.n[k]);
    }
    csv.row({c.t_grid[k], v.mean(), v.stderr_(), n.mean(), n.stderr_(),
             static_cast<double>(c.replicas), static_cast<double>(r)});
    if (v.mean() > 0) series.emplace_back(c.t_grid[k], v.mean());
    if (v.mean() > 0 && v.stderr_() > 0.05 * v.mean()) {
      std::ostringstream w;
      w << "t=" << c.t_grid[k] << ": relative stderr " << v.stderr_() / v.mean() << " exceeds 5%";
      res.warnings.push_back(w.str());
    }
  }
  res.csv = csv.text();
  if (series.size() >= 4) res.fit["exponent"] = fit_to_json(fit_power(series));
  return res;
}

inline std::int64_t default_k_max(double p) {
  const double a = 2.0 * std::sqrt(p * (1.0 - p));
  return static_cast<std::int64_t>(std::ceil(std::log(1e-9) / std::log(a)));
}

// Infinite-horizon one-sided sequential process on {0, 1, ...}: Monte Carlo
// E U+ against the exact sum.
inline ExperimentResult exp_subcritical_line(const ExperimentConfig& c, int workers) {
  ExperimentResult res;
  res.config = c;
  res.seeds = replica_seeds(c);
  CsvWriter csv({"p", "exact_uplus", "exact_from_one", "tail_bound", "mc_mean", "mc_stderr",
                 "z_score", "scaled", "k_max", "censored"});
  std::vector<std::pair<double, double>> series;
  for (std::size_t j = 0; j < c.p_grid.size(); ++j) {
    const double p = c.p_grid[j];
    const std::int64_t k_max = c.k_max > 0 ? c.k_max : default_k_max(p);
    struct Rep {
      double u = 0;
      std::int64_t censored = 0;
    };
    const auto reps = parallel_map(res.seeds.size(), workers, [&](std::size_t i) {
      const std::uint64_t seed = derive_seed(res.seeds[i], {j});
      if (c.sampler == "ruin") {
        Rng rng(seed);
        return Rep{sample_halfline_uplus(p, k_max, rng).total, 0};
      }
      SimParams s;
      s.graph = GraphSpec::Line();
      s.region = Region::Interval(0, k_max);
      s.p = p;
      s.lambda_a = c.lambda_a;
      s.lambda_b = 0;
      s.horizon = kInf;
      s.seed = seed;
      SequentialOptions opt;
      opt.step_cap = c.step_cap;
      opt.lazy_landscape_from = k_max + 1;
      const auto run = run_sequential(s, opt);
      return Rep{run.v_total, run.censored};
    });
    RunningStats mc;
    std::int64_t censored = 0;
    for (const auto& r : reps) {
      mc.add(r.u);
      censored += r.censored;
    }
    res.censored += censored;
    const auto exact = expected_Uplus(p);
    const double z = mc.stderr_() > 0 ? (mc.mean() - exact.value) / mc.stderr_() : 0.0;
    csv.row({p, exact.value, exact.value_from_one, exact.tail_bound, mc.mean(), mc.stderr_(), z,
             exact.scaled, static_cast<double>(k_max), static_cast<double>(censored)});
    series.emplace_back(1.0 - 2.0 * p, exact.value);
    // Expected number of released walks is replicas * p * (k_max + 1).
    const double released = static_cast<double>(c.replicas) * p * static_cast<double>(k_max + 1);
    if (static_cast<double>(censored) > 1e-3 * std::max(released, 1.0)) {
      std::ostringstream w;
      w << "p=" << p << ": censoring fraction above 0.1%";
      res.warnings.push_back(w.str());
    }
  }
  res.csv = csv.text();
  if (series.size() >= 4) res.fit["exact_slope"] = fit_to_json(fit_power(series));
  return res;
}

// Root density and occupation time on the truncated lattice against the
// torus of the same radius, coupled through the site-keyed randomness.
inline ExperimentResult exp_torus_compare(const ExperimentConfig& c, int workers) {
  ExperimentResult res;
  res.config = c;
  res.seeds = replica_seeds(c);
  CsvWriter csv({"t", "radius", "mean_n_lattice", "mean_n_torus", "diff_n", "stderr_diff_n",
                 "mean_v_lattice", "mean_v_torus", "diff_v", "stderr_diff_v",
                 "surplus_violations"});
  const int d = c.graph.dim();
  for (double t : c.t_grid) {
    const std::int64_t r = c.radius > 0 ? c.radius : truncation_radius(c.graph, t, c.C);
    struct Rep {
      double n_lat = 0, n_tor = 0, v_lat = 0, v_tor = 0;
      bool surplus_ok = true;
    };
    const auto reps = parallel_map(res.seeds.size(), workers, [&](std::size_t i) {
      SimParams s;
      s.graph = c.graph.kind == GraphKind::kLine ? GraphSpec::Line() : GraphSpec::Lattice(d);
      s.region = Region::Ball(r);
      s.p = c.p;
      s.lambda_a = c.lambda_a;
      s.lambda_b = c.lambda_b;
      s.horizon = t;
      s.seed = res.seeds[i];
      s.sample_times = {t};
      const auto lat = run_crs(s);
      s.graph = GraphSpec::Torus(d, static_cast<int>(r));
      s.record_fields = true;
      const Configuration config = init_configuration(s);
      const auto tor = run_crs(s, config);
      std::int64_t d0 = 0, alive_a = 0;
      for (const auto& q : config) d0 += q.kind == Kind::kA ? 1 : -1;
      for (const auto& [site, v] : tor.fields.back()) alive_a += v > 0 ? v : 0;
      return Rep{lat.obs.n_root[0], tor.obs.n_root[0], lat.obs.v_root[0], tor.obs.v_root[0],
                 alive_a >= std::max<std::int64_t>(d0, 0)};
    });
    RunningStats nl, nt, dn, vl, vt, dv;
    std::int64_t bad = 0;
    for (const auto& x : reps) {
      nl.add(x.n_lat);
      nt.add(x.n_tor);
      dn.add(x.n_lat - x.n_tor);
      vl.add(x.v_lat);
      vt.add(x.v_tor);
      dv.add(x.v_lat - x.v_tor);
      bad += !x.surplus_ok;
    }
    csv.row({t, static_cast<double>(r), nl.mean(), nt.mean(), dn.mean(), dn.stderr_(), vl.mean(),
             vt.mean(), dv.mean(), dv.stderr_(), static_cast<double>(bad)});
    Json row{{"t", t}, {"radius", r}, {"z_n", dn.stderr_() > 0 ? dn.mean() / dn.stderr_() : 0.0},
             {"z_v", dv.stderr_() > 0 ? dv.mean() / dv.stderr_() : 0.0}, {"surplus_violations", bad}};
    res.fit["compare"].push_back(row);
  }
  res.csv = csv.text();
  return res;
}

// Tree: Monte Carlo W_n against the exact recursion, Monte Carlo E V_t, the
// exact critical means on n_grid and the exact subcritical limits on eps_grid.
inline ExperimentResult exp_tree(const ExperimentConfig& c, int workers) {
  ExperimentResult res;
  res.config = c;
  res.seeds = replica_seeds(c);
  const int d = c.graph.d, n = c.graph.n;
  CsvWriter csv({"kind", "x", "exact", "mc_mean", "mc_stderr", "z_score"});
  auto row = [&](const char* kind, double x, double exact, double mean, double se) {
    const double z = se > 0 && std::isfinite(exact) ? (mean - exact) / se : 0.0;
    csv.row_strings({kind, fmt_num(x), fmt_num(exact), fmt_num(mean), fmt_num(se), fmt_num(z)});
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();

  if (n >= 1) {
    const auto w = w_sequence(d, c.p, n);
    const auto visitors = parallel_map(res.seeds.size(), workers, [&](std::size_t i) {
      SimParams s;
      s.graph = c.graph;
      s.region = Region::Shell(1, n);
      s.p = c.p;
      s.lambda_a = c.lambda_a;
      s.lambda_b = 0;
      s.horizon = kInf;
      s.seed = res.seeds[i];
      return static_cast<double>(run_crs(s).obs.root_visitors);
    });
    RunningStats st;
    for (double v : visitors) st.add(v);
    row("w_mc", n, w.means[n], st.mean(), st.stderr_());
    res.fit["w_n"] = Json{{"n", n}, {"exact", w.means[n]}, {"mc_mean", st.mean()},
                          {"mc_stderr", st.stderr_()}};
  }

  if (!c.t_grid.empty()) {
    const double t_max = c.t_grid.back();
    const std::int64_t radius = truncation_radius(c.graph, t_max, c.C);
    const int depth = static_cast<int>(std::min<std::int64_t>(radius, c.depth_cap));
    const auto reps = parallel_map(res.seeds.size(), workers, [&](std::size_t i) {
      SimParams s;
      s.graph = GraphSpec::BiTree(d, depth);
      s.region = Region::Ball(depth);
      s.p = c.p;
      s.lambda_a = c.lambda_a;
      s.lambda_b = 0;
      s.horizon = t_max;
      s.seed = res.seeds[i];
      s.sample_times = c.t_grid;
      return run_crs(s).obs.v_root;
    });
    std::vector<std::pair<double, double>> series;
    for (std::size_t k = 0; k < c.t_grid.size(); ++k) {
      RunningStats st;
      for (const auto& v : reps) st.add(v[k]);
      row("v_mc", c.t_grid[k], nan, st.mean(), st.stderr_());
      series.emplace_back(c.t_grid[k], st.mean());
    }
    if (series.size() >= 4) res.fit["v_t"] = fit_to_json(fit_log(series));
    res.fit["v_t_depth"] = depth;
  }

  if (!c.n_grid.empty()) {
    const auto w = w_sequence(d, c.p, c.n_grid.back());
    std::vector<std::pair<double, double>> series;
    for (int m : c.n_grid) {
      row("mu_exact", m, w.means[m], nan, nan);
      if (m >= 1) series.emplace_back(m, w.means[m]);
    }
    if (series.size() >= 4) res.fit["mu_n"] = fit_to_json(fit_log(series));
  }

  if (!c.eps_grid.empty()) {
    std::vector<std::pair<double, double>> series;
    for (double e : c.eps_grid) {
      const auto lim = subcritical_limit(d, 0.5 - e);
      row("limit_exact", e, lim.mean, nan, nan);
      series.emplace_back(1.0 / e, lim.mean);
    }
    if (series.size() >= 4) res.fit["limit"] = fit_to_json(fit_log(series));
  }
  res.csv = csv.text();
  return res;
}

inline ExperimentResult run_experiment(const ExperimentConfig& c, int workers = 0) {
  c.validate();
  const int w = resolve_workers(workers > 0 ? workers : c.workers);
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult r;
  if (c.experiment == "critical_line") r = exp_critical_line(c, w);
  else if (c.experiment == "subcritical_line") r = exp_subcritical_line(c, w);
  else if (c.experiment == "torus_compare") r = exp_torus_compare(c, w);
  else r = exp_tree(c, w);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

// ---------------------------------------------------------------------------
// Files and replay
// ---------------------------------------------------------------------------

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string strip_extension(const std::string& path) {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path;
  return path.substr(0, dot);
}

// Writes <stem>.csv, <stem>.manifest.json and <stem>.fit.json.
inline void write_outputs(const ExperimentResult& r, const std::string& csv_path) {
  const std::string stem = strip_extension(csv_path);
  write_text(csv_path, r.csv);
  Json m = r.manifest();
  const auto slash = csv_path.find_last_of('/');
  m["csv_file"] = slash == std::string::npos ? csv_path : csv_path.substr(slash + 1);
  write_text(stem + ".manifest.json", m.dump(2) + "\n");
  write_text(stem + ".fit.json", r.fit.dump(2) + "\n");
}

class ReplayRefused : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReplayOutcome {
  bool identical = false;
  std::string expected_checksum;
  std::string actual_checksum;
  ExperimentResult result;
};

inline ReplayOutcome replay(const Json& manifest, int workers = 0) {
  const std::string version = manifest.at("code_version").get<std::string>();
  if (version != kCodeVersion)
    throw ReplayRefused("manifest was written by '" + version + "', this is '" + kCodeVersion + "'");
  const ExperimentConfig c = config_from_json(manifest.at("config"));
  ReplayOutcome out;
  out.result = run_experiment(c, workers);
  out.expected_checksum = manifest.at("csv_checksum").get<std::string>();
  out.actual_checksum = checksum(out.result.csv);
  const auto seeds = manifest.at("seeds").get<std::vector<std::uint64_t>>();
  out.identical = out.expected_checksum == out.actual_checksum && seeds == out.result.seeds;
  return out;
}

// ---------------------------------------------------------------------------
// Random-walk bound suite
// ---------------------------------------------------------------------------

struct BoundCheck {
  std::string name;
  double estimate = 0;
  double stderr_ = 0;
  double bound = 0;
  bool ok() const { return estimate <= bound + 4.0 * stderr_; }
};

// Monte Carlo estimates against the random-walk bounds; `walks` samples per
// grid point (a tenth of that for the many-walker count).
inline std::vector<BoundCheck> rw_bound_suite(std::uint64_t seed, int walks) {
  std::vector<BoundCheck> out;
  auto proportion = [&](std::string name, double bound, std::uint64_t tag_value, auto event) {
    Rng rng(derive_seed(seed, {tag_value}));
    std::int64_t hits = 0;
    for (int i = 0; i < walks; ++i) hits += event(rng) ? 1 : 0;
    const double q = static_cast<double>(hits) / walks;
    out.push_back({std::move(name), q, std::sqrt(std::max(q * (1 - q), 1.0 / walks) / walks), bound});
  };
  const double t = 100;
  std::uint64_t k = 0;
  for (double eps : {0.0, 0.2})
    for (double x : {10.0, 30.0, 60.0}) {
      std::ostringstream name;
      name << "srw_max t=" << t << " eps=" << eps << " x=" << x;
      proportion(name.str(), srw_max_bound(x, t), ++k, [&](Rng& rng) {
        return static_cast<double>(walk_max(rng, t, eps)) >= x + 2 * eps * t;
      });
    }
  for (double kk : {5.0, 20.0, 40.0}) {
    std::ostringstream name;
    name << "poisson_tail t=" << t << " k=" << kk;
    // Fully biased walk: the maximum is the Poisson number of steps.
    proportion(name.str(), poisson_tail_bound(kk, t), ++k,
               [&](Rng& rng) { return static_cast<double>(walk_max(rng, t, 1.0)) >= t + kk; });
  }
  {
    Rng rng(derive_seed(seed, {++k}));
    RunningStats s;
    for (int i = 0; i < walks; ++i) s.add(walk_local_time(rng, t));
    out.push_back({"local_time t=100", s.mean(), s.stderr_(), local_time_bound(t)});
  }
  for (auto [a, x, tt] : {std::tuple{5, 30, 100.0}, std::tuple{10, 60, 400.0}, std::tuple{3, 45, 225.0}}) {
    std::ostringstream name;
    name << "gamblers_ruin a=" << a << " x=" << x << " t=" << tt;
    proportion(name.str(), gr_time_bound(a, x, tt), ++k, [&, a = a, x = x, tt = tt](Rng& rng) {
      const auto r = walk_ruin(rng, a, x);
      return r.hit_x_first && r.time <= tt;
    });
  }
  for (double tt : {5.0, 20.0}) {
    Rng rng(derive_seed(seed, {++k}));
    RunningStats s;
    const int m = std::max(2, walks / 10);
    for (int i = 0; i < m; ++i)
      s.add(static_cast<double>(distinct_visitors(rng, tt, static_cast<std::int64_t>(4 * tt))));
    std::ostringstream name;
    name << "distinct_visitors t=" << tt;
    out.push_back({name.str(), s.mean(), s.stderr_(), tt});
  }
  return out;
}

}  // namespace annihilate

#endif  // ANNIHILATE_EXPERIMENTS_HPP_
