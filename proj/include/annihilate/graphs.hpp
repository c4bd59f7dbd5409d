// Geometries and random-walk kernels: the line, Z^d, the torus (Z/2rZ)^d and
// the root-directed d-ary subtree of the bidirected 2d-regular tree.

#ifndef ANNIHILATE_GRAPHS_HPP_
#define ANNIHILATE_GRAPHS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "annihilate/random.hpp"

namespace annihilate {

enum class GraphKind { kLine, kLattice, kTorus, kBiTree };

struct GraphSpec {
  GraphKind kind = GraphKind::kLine;
  int d = 1;  // dimension, or branching number for the tree
  int r = 0;  // torus halfwidth
  int n = 0;  // tree depth

  static GraphSpec Line() { return {GraphKind::kLine, 1, 0, 0}; }
  static GraphSpec Lattice(int d) { return {GraphKind::kLattice, d, 0, 0}; }
  static GraphSpec Torus(int d, int r) { return {GraphKind::kTorus, d, r, 0}; }
  static GraphSpec BiTree(int d, int n) { return {GraphKind::kBiTree, d, 0, n}; }

  bool is_tree() const { return kind == GraphKind::kBiTree; }
  int dim() const { return kind == GraphKind::kLine ? 1 : d; }

  friend bool operator==(const GraphSpec&, const GraphSpec&) = default;

  std::string to_string() const {
    switch (kind) {
      case GraphKind::kLine: return "line";
      case GraphKind::kLattice: return "lattice:" + std::to_string(d);
      case GraphKind::kTorus:
        return "torus:" + std::to_string(d) + ":" + std::to_string(r);
      case GraphKind::kBiTree:
        return "bitree:" + std::to_string(d) + ":" + std::to_string(n);
    }
    return {};
  }

  // Accepts "line", "lattice:d", "torus:d:r", "bitree:d:n".
  static GraphSpec parse(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
    auto num = [&](std::size_t i) {
      if (i >= parts.size()) throw std::invalid_argument("bad graph: " + text);
      std::size_t used = 0;
      int v = std::stoi(parts[i], &used);
      if (used != parts[i].size())
        throw std::invalid_argument("bad graph: " + text);
      return v;
    };
    if (parts.empty()) throw std::invalid_argument("empty graph spec");
    const std::string& head = parts[0];
    GraphSpec s;
    if (head == "line" && parts.size() == 1) s = Line();
    else if (head == "lattice" && parts.size() == 2) s = Lattice(num(1));
    else if (head == "torus" && parts.size() == 3) s = Torus(num(1), num(2));
    else if (head == "bitree" && parts.size() == 3) s = BiTree(num(1), num(2));
    else throw std::invalid_argument("bad graph: " + text);
    return s;
  }
};

// Sites are packed into 64 bits. Lattice and torus sites store each
// coordinate as a two's-complement field of 64/d bits, so the origin is 0.
// Tree sites use heap numbering (root 0, children of v are d*v+1 .. d*v+d),
// which is level order with words sorted lexicographically inside a level.
using SiteId = std::int64_t;
inline constexpr SiteId kEscaped = std::numeric_limits<SiteId>::min();

class Graph {
 public:
  explicit Graph(const GraphSpec& spec) : spec_(spec) {
    const int d = spec.d;
    if (d <= 0) throw std::invalid_argument("graph dimension must be positive");
    if (spec.kind == GraphKind::kTorus && spec.r <= 0)
      throw std::invalid_argument("torus halfwidth must be positive");
    if (spec.kind == GraphKind::kBiTree) {
      if (d < 2) throw std::invalid_argument("tree branching must be >= 2");
      if (spec.n < 0) throw std::invalid_argument("tree depth must be >= 0");
      long double total = 0, level = 1;
      for (int k = 0; k <= spec.n; ++k) {
        total += level;
        level *= d;
      }
      if (total > 9.0e18L) throw std::invalid_argument("tree too deep");
      level_start_.push_back(0);
      std::int64_t w = 1;
      for (int k = 0; k <= spec.n; ++k) {
        level_start_.push_back(level_start_.back() + w);
        if (k < spec.n) w *= d;
      }
    } else {
      dim_ = spec.dim();
      bits_ = dim_ == 1 ? 64 : 64 / dim_;
      if (spec.kind == GraphKind::kTorus &&
          (dim_ > 1 && 2LL * spec.r >= (1LL << (bits_ - 1))))
        throw std::invalid_argument("torus too wide for packing");
    }
  }

  const GraphSpec& spec() const { return spec_; }
  bool is_tree() const { return spec_.is_tree(); }
  int dim() const { return is_tree() ? 1 : dim_; }
  SiteId root() const { return 0; }

  // Number of equally likely kernel choices at a live site.
  std::uint32_t num_choices() const {
    return is_tree() ? static_cast<std::uint32_t>(spec_.d)
                     : static_cast<std::uint32_t>(2 * dim_);
  }

  // Deterministic kernel: choice is uniform on {0, ..., num_choices()-1}.
  // Lattice choice 2i moves +1 in coordinate i, 2i+1 moves -1. Tree choice 0
  // moves to the parent; every other choice leaves the subtree.
  SiteId step(SiteId site, std::uint32_t choice) const {
    if (site == kEscaped)
      throw std::logic_error("step called on an escaped walker");
    if (is_tree()) {
      if (choice != 0 || site == 0) return kEscaped;
      return (site - 1) / spec_.d;
    }
    if (dim_ == 1) {
      SiteId x = site + ((choice & 1) ? -1 : 1);
      if (spec_.kind == GraphKind::kTorus) x = wrap(x);
      return x;
    }
    const int axis = static_cast<int>(choice >> 1);
    std::int64_t x = coord(site, axis) + ((choice & 1) ? -1 : 1);
    if (spec_.kind == GraphKind::kTorus) x = wrap(x);
    return with_coord(site, axis, x);
  }

  SiteId sample_step(SiteId site, Rng& rng) const {
    return step(site, rng.below(num_choices()));
  }

  // l-infinity norm on lattices and tori, level on the tree.
  std::int64_t distance_to_root(SiteId site) const {
    if (site == kEscaped)
      throw std::logic_error("distance of an escaped walker");
    if (is_tree()) return level(site);
    std::int64_t m = 0;
    for (int i = 0; i < dim_; ++i) {
      std::int64_t c = coord(site, i);
      m = std::max(m, c < 0 ? -c : c);
    }
    return m;
  }

  // ---- lattice / torus coordinates ----

  std::int64_t coord(SiteId site, int axis) const {
    if (dim_ == 1) return site;
    const auto u = static_cast<std::uint64_t>(site);
    const std::uint64_t field = (u >> (axis * bits_)) & mask();
    // sign-extend
    const std::uint64_t sign = 1ULL << (bits_ - 1);
    return static_cast<std::int64_t>((field ^ sign)) - static_cast<std::int64_t>(sign);
  }

  std::vector<std::int64_t> coords(SiteId site) const {
    std::vector<std::int64_t> c(dim_);
    for (int i = 0; i < dim_; ++i) c[i] = coord(site, i);
    return c;
  }

  SiteId site_at(const std::vector<std::int64_t>& c) const {
    if (is_tree() || static_cast<int>(c.size()) != dim_)
      throw std::invalid_argument("coordinate vector has wrong length");
    if (dim_ == 1)
      return spec_.kind == GraphKind::kTorus ? wrap(c[0]) : c[0];
    SiteId s = 0;
    for (int i = 0; i < dim_; ++i) {
      std::int64_t x = spec_.kind == GraphKind::kTorus ? wrap(c[i]) : c[i];
      s = with_coord(s, i, x);
    }
    return s;
  }

  // Canonical torus representative in (-r, r].
  std::int64_t wrap(std::int64_t x) const {
    const std::int64_t w = 2LL * spec_.r;
    std::int64_t y = ((x + spec_.r - 1) % w + w) % w;
    return y - spec_.r + 1;
  }

  // ---- tree words ----

  int level(SiteId site) const {
    auto it = std::upper_bound(level_start_.begin(), level_start_.end(), site);
    return static_cast<int>(it - level_start_.begin()) - 1;
  }

  // Word over {0..d-1} of length level(site); letter j is the branch taken at
  // depth j+1 on the way down from the root.
  std::vector<int> word(SiteId site) const {
    std::vector<int> w;
    while (site > 0) {
      w.push_back(static_cast<int>((site - 1) % spec_.d));
      site = (site - 1) / spec_.d;
    }
    std::reverse(w.begin(), w.end());
    return w;
  }

  SiteId site_of_word(const std::vector<int>& w) const {
    SiteId s = 0;
    for (int letter : w) {
      if (letter < 0 || letter >= spec_.d)
        throw std::invalid_argument("tree word letter out of range");
      s = s * spec_.d + 1 + letter;
    }
    return s;
  }

  std::int64_t level_start(int k) const { return level_start_.at(k); }

  // ---- enumeration ----

  // All sites with distance_to_root <= radius, sorted by distance and then
  // lexicographically by coordinates (or words). For the torus the radius is
  // clamped to r; for the tree to the depth.
  std::vector<SiteId> sites_within(std::int64_t radius,
                                   std::int64_t min_radius = 0) const {
    std::vector<SiteId> out;
    if (is_tree()) {
      const int top = static_cast<int>(std::min<std::int64_t>(radius, spec_.n));
      for (int k = static_cast<int>(std::max<std::int64_t>(0, min_radius));
           k <= top; ++k)
        for (SiteId s = level_start_[k]; s < level_start_[k + 1]; ++s)
          out.push_back(s);
      return out;
    }
    std::int64_t lo = -radius, hi = radius;
    if (spec_.kind == GraphKind::kTorus) {
      lo = std::max<std::int64_t>(lo, -spec_.r + 1);
      hi = std::min<std::int64_t>(hi, spec_.r);
    }
    std::vector<std::vector<std::int64_t>> pts;
    std::vector<std::int64_t> c(dim_, lo);
    if (lo > hi) return out;
    while (true) {
      pts.push_back(c);
      int i = dim_ - 1;
      while (i >= 0 && c[i] == hi) c[i--] = lo;
      if (i < 0) break;
      ++c[i];
    }
    auto norm = [](const std::vector<std::int64_t>& v) {
      std::int64_t m = 0;
      for (auto x : v) m = std::max(m, x < 0 ? -x : x);
      return m;
    };
    std::stable_sort(pts.begin(), pts.end(), [&](const auto& a, const auto& b) {
      const auto na = norm(a), nb = norm(b);
      if (na != nb) return na < nb;
      return a < b;
    });
    for (const auto& v : pts)
      if (norm(v) >= min_radius) out.push_back(site_at(v));
    return out;
  }

  // Every site of a finite graph (torus, tree).
  std::vector<SiteId> all_sites() const {
    if (spec_.kind == GraphKind::kTorus) return sites_within(spec_.r);
    if (is_tree()) return sites_within(spec_.n);
    throw std::logic_error("infinite graph has no finite site list");
  }

  std::string site_name(SiteId s) const {
    if (s == kEscaped) return "escaped";
    std::string out;
    if (is_tree()) {
      for (int l : word(s)) out += std::to_string(l);
      return out.empty() ? "root" : out;
    }
    for (int i = 0; i < dim_; ++i) {
      if (i) out += ",";
      out += std::to_string(coord(s, i));
    }
    return "(" + out + ")";
  }

 private:
  std::uint64_t mask() const {
    return bits_ == 64 ? ~0ULL : ((1ULL << bits_) - 1);
  }
  SiteId with_coord(SiteId site, int axis, std::int64_t x) const {
    auto u = static_cast<std::uint64_t>(site);
    const int shift = axis * bits_;
    u &= ~(mask() << shift);
    u |= (static_cast<std::uint64_t>(x) & mask()) << shift;
    return static_cast<SiteId>(u);
  }

  GraphSpec spec_;
  int dim_ = 1;
  int bits_ = 64;
  std::vector<std::int64_t> level_start_;  // tree only, size n+2
};

inline Graph make_graph(const GraphSpec& spec) { return Graph(spec); }

// Radius beyond which initial particles are dropped: ceil(C sqrt(t log t)) on
// lattices and tori, ceil(C t) on the tree.
inline std::int64_t truncation_radius(const GraphSpec& spec, double t, double C) {
  if (!(t >= 2)) throw std::invalid_argument("truncation radius needs t >= 2");
  if (!(C > 0)) throw std::invalid_argument("truncation constant must be positive");
  if (spec.is_tree()) return static_cast<std::int64_t>(std::ceil(C * t));
  return static_cast<std::int64_t>(std::ceil(C * std::sqrt(t * std::log(t))));
}

}  // namespace annihilate

#endif  // ANNIHILATE_GRAPHS_HPP_
