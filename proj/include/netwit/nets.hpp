#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "netwit/error.hpp"
#include "netwit/metric_space.hpp"

namespace netwit {

/// floor(log2 x) computed exactly for positive finite x.
inline int floor_log2(double x) {
  int e = 0;
  std::frexp(x, &e);  // x = m * 2^e, m in [0.5, 1)
  return e - 1;
}

/// ceil(log2 x) computed exactly for positive finite x.
inline int ceil_log2(double x) {
  int e = 0;
  const double m = std::frexp(x, &e);
  return m == 0.5 ? e - 1 : e;
}

inline double pow2(int i) { return std::ldexp(1.0, i); }

/// One level N_i of a net hierarchy: centers (ascending point indices) and the
/// nearest-center assignment pi_i, ties going to the lowest center index.
struct NetLevel {
  int level = 0;
  double scale = 1.0;
  std::vector<std::size_t> centers;
  std::vector<std::size_t> assign;  // point -> position in `centers`

  std::size_t size() const noexcept { return centers.size(); }
  std::size_t center_of(std::size_t point) const { return centers[assign[point]]; }
};

/// Nearest center for every point; ties resolved toward the lowest center position.
inline std::vector<std::size_t> assign_nearest(const FiniteMetricSpace& space,
                                               std::span<const std::size_t> centers) {
  std::vector<std::size_t> assign(space.size(), 0);
  for (std::size_t x = 0; x < space.size(); ++x) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const double d = space(x, centers[k]);
      if (d < best) {
        best = d;
        assign[x] = k;
      }
    }
  }
  return assign;
}

/// Greedy well-separated net: visiting points in `order` (index order by default), a
/// point becomes a center iff it is farther than `scale` from every existing center.
inline NetLevel build_net(const FiniteMetricSpace& space, double scale,
                          std::span<const std::size_t> order = {}) {
  if (!(scale > 0.0)) throw Error("net scale must be positive");
  std::vector<std::size_t> visit;
  if (order.empty()) {
    visit.resize(space.size());
    std::iota(visit.begin(), visit.end(), std::size_t{0});
  } else {
    visit.assign(order.begin(), order.end());
  }
  NetLevel lvl;
  lvl.scale = scale;
  for (std::size_t x : visit) {
    bool far = true;
    for (std::size_t c : lvl.centers)
      if (space(x, c) <= scale) {
        far = false;
        break;
      }
    if (far) lvl.centers.push_back(x);
  }
  std::sort(lvl.centers.begin(), lvl.centers.end());
  lvl.assign = assign_nearest(space, lvl.centers);
  return lvl;
}

enum class PackingRule {
  strict,   ///< distinct centers farther than the scale
  touching  ///< distinct centers at least the scale apart
};

struct LevelCheck {
  enum class Kind { ok, bad_center, net, packing, assignment };
  Kind kind = Kind::ok;
  std::size_t first = 0;   // offending point or center
  std::size_t second = 0;  // second center for packing/assignment failures
  std::string message;

  bool ok() const noexcept { return kind == Kind::ok; }
};

/// Checks the net and packing predicates of one level verbatim, then (optionally)
/// that `assign` is the lowest-index nearest-center map. Returns the first violation.
inline LevelCheck validate_level(const FiniteMetricSpace& space, const NetLevel& level,
                                 PackingRule rule = PackingRule::strict,
                                 bool check_assignment = true) {
  LevelCheck out;
  const std::size_t n = space.size();
  for (std::size_t k = 0; k < level.centers.size(); ++k) {
    if (level.centers[k] >= n || (k > 0 && level.centers[k] <= level.centers[k - 1])) {
      out.kind = LevelCheck::Kind::bad_center;
      out.first = k;
      out.message = "centers must be distinct ascending point indices";
      return out;
    }
  }
  for (std::size_t x = 0; x < n; ++x) {
    bool covered = false;
    if (level.assign.size() == n && level.assign[x] < level.centers.size())
      covered = space(x, level.centers[level.assign[x]]) <= level.scale;
    for (std::size_t k = 0; !covered && k < level.centers.size(); ++k)
      covered = space(x, level.centers[k]) <= level.scale;
    if (!covered) {
      out.kind = LevelCheck::Kind::net;
      out.first = x;
      out.message = "point " + std::to_string(x) + " is farther than the scale from every center";
      return out;
    }
  }
  for (std::size_t a = 0; a < level.centers.size(); ++a)
    for (std::size_t b = a + 1; b < level.centers.size(); ++b) {
      const double d = space(level.centers[a], level.centers[b]);
      const bool bad = rule == PackingRule::strict ? d <= level.scale : d < level.scale;
      if (bad) {
        out.kind = LevelCheck::Kind::packing;
        out.first = level.centers[a];
        out.second = level.centers[b];
        out.message = "centers " + std::to_string(out.first) + " and " +
                      std::to_string(out.second) + " are too close";
        return out;
      }
    }
  if (check_assignment) {
    if (level.assign.size() != n) {
      out.kind = LevelCheck::Kind::assignment;
      out.message = "assignment has the wrong length";
      return out;
    }
    const auto expect = assign_nearest(space, level.centers);
    for (std::size_t x = 0; x < n; ++x)
      if (expect[x] != level.assign[x]) {
        out.kind = LevelCheck::Kind::assignment;
        out.first = x;
        out.second = level.assign[x];
        out.message = "point " + std::to_string(x) + " is not assigned to its nearest center";
        return out;
      }
  }
  return out;
}

/// Well-separated 2^i-nets for every i in [l, r] with l = floor(log2(eps/8)) and
/// r = ceil(log2 D), plus the parent maps pi_{i+1} restricted to N_i.
class NetHierarchy {
 public:
  NetHierarchy(FiniteMetricSpace space, double epsilon, int l, int r, std::vector<NetLevel> levels)
      : space_(std::move(space)), epsilon_(epsilon), l_(l), r_(r), levels_(std::move(levels)) {
    if (l_ > r_ || levels_.size() != static_cast<std::size_t>(r_ - l_ + 1))
      throw EpsilonOutOfRange("hierarchy must provide one level for each i in [l, r]");
    for (int i = l_; i <= r_; ++i) {
      NetLevel& lvl = levels_[i - l_];
      lvl.level = i;
      lvl.scale = pow2(i);
      if (lvl.assign.size() != space_.size()) lvl.assign = assign_nearest(space_, lvl.centers);
    }
    if (levels_.back().centers.size() != 1)
      throw Error("top level of a hierarchy must contain exactly one center");
    parents_.resize(levels_.size() - 1);
    for (std::size_t k = 0; k + 1 < levels_.size(); ++k) {
      const NetLevel& lo = levels_[k];
      const NetLevel& hi = levels_[k + 1];
      parents_[k].resize(lo.centers.size());
      for (std::size_t c = 0; c < lo.centers.size(); ++c) parents_[k][c] = hi.assign[lo.centers[c]];
    }
  }

  /// Level bounds implied by a proximity parameter and a diameter.
  static std::pair<int, int> level_range(double epsilon, double diameter) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
      throw EpsilonOutOfRange("epsilon must be positive and finite");
    const int l = floor_log2(epsilon / 8.0);
    const int r = diameter > 0.0 ? ceil_log2(diameter) : l;
    if (l > r)
      throw EpsilonOutOfRange("epsilon " + std::to_string(epsilon) +
                              " too large for diameter " + std::to_string(diameter));
    return {l, r};
  }

  const FiniteMetricSpace& space() const noexcept { return space_; }
  double epsilon() const noexcept { return epsilon_; }
  int l() const noexcept { return l_; }
  int r() const noexcept { return r_; }
  std::size_t level_count() const noexcept { return levels_.size(); }
  const std::vector<NetLevel>& levels() const noexcept { return levels_; }

  const NetLevel& level(int i) const {
    check_level(i);
    return levels_[i - l_];
  }

  /// Parent map from positions in N_i to positions in N_{i+1}; requires i < r.
  const std::vector<std::size_t>& parent(int i) const {
    if (i < l_ || i >= r_) throw LevelOutOfRange("no parent map for level " + std::to_string(i));
    return parents_[i - l_];
  }

  void check_level(int i) const {
    if (i < l_ || i > r_)
      throw LevelOutOfRange("level " + std::to_string(i) + " outside [" + std::to_string(l_) +
                            ", " + std::to_string(r_) + "]");
  }

 private:
  FiniteMetricSpace space_;
  double epsilon_;
  int l_, r_;
  std::vector<NetLevel> levels_;
  std::vector<std::vector<std::size_t>> parents_;
};

/// Greedy hierarchy in point-index order, or in a seeded random order when `shuffle_seed`
/// is given.
inline NetHierarchy build_hierarchy(const FiniteMetricSpace& space, double epsilon,
                                    std::optional<std::uint64_t> shuffle_seed = std::nullopt) {
  const auto [l, r] = NetHierarchy::level_range(epsilon, space.diameter());
  std::vector<std::size_t> order;
  if (shuffle_seed) {
    order.resize(space.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(*shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<NetLevel> levels;
  levels.reserve(static_cast<std::size_t>(r - l + 1));
  for (int i = l; i <= r; ++i) levels.push_back(build_net(space, pow2(i), order));
  return {space, epsilon, l, r, std::move(levels)};
}

struct DualityCounts {
  std::size_t min_net = 0;        // N(X, d, eps)
  std::size_t max_packing = 0;    // P(X, d, eps)
  std::size_t min_net_half = 0;   // N(X, d, eps/2)
  bool holds = false;             // N(eps) <= P(eps) <= N(eps/2)
};

namespace detail {

inline std::size_t exact_min_net(const FiniteMetricSpace& space, double scale) {
  const std::size_t n = space.size();
  std::vector<std::uint32_t> cover(n, 0);
  for (std::size_t c = 0; c < n; ++c)
    for (std::size_t x = 0; x < n; ++x)
      if (space(c, x) <= scale) cover[c] |= std::uint32_t{1} << x;
  const std::uint32_t all = n == 32 ? ~0u : (std::uint32_t{1} << n) - 1;
  std::size_t best = n;
  for (std::uint32_t mask = 1; mask <= all && mask != 0; ++mask) {
    const auto k = static_cast<std::size_t>(std::popcount(mask));
    if (k >= best) continue;
    std::uint32_t covered = 0;
    for (std::size_t c = 0; c < n; ++c)
      if (mask >> c & 1u) covered |= cover[c];
    if (covered == all) best = k;
  }
  return best;
}

inline std::size_t exact_max_packing(const FiniteMetricSpace& space, double scale) {
  const std::size_t n = space.size();
  std::vector<std::uint32_t> conflict(n, 0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b && space(a, b) <= scale) conflict[a] |= std::uint32_t{1} << b;
  const std::uint32_t all = (std::uint32_t{1} << n) - 1;
  std::size_t best = 0;
  for (std::uint32_t mask = 1; mask <= all && mask != 0; ++mask) {
    const auto k = static_cast<std::size_t>(std::popcount(mask));
    if (k <= best) continue;
    bool ok = true;
    for (std::size_t c = 0; c < n && ok; ++c)
      if ((mask >> c & 1u) && (conflict[c] & mask)) ok = false;
    if (ok) best = k;
  }
  return best;
}

}  // namespace detail

/// Exhaustive minimum net / maximum packing sizes (n <= 14).
inline DualityCounts net_packing_duality_check(const FiniteMetricSpace& space, double scale) {
  if (space.size() > 14)
    throw TooLargeForExact("exhaustive net search is limited to 14 points");
  DualityCounts out;
  out.min_net = detail::exact_min_net(space, scale);
  out.max_packing = detail::exact_max_packing(space, scale);
  out.min_net_half = detail::exact_min_net(space, scale / 2.0);
  out.holds = out.min_net <= out.max_packing && out.max_packing <= out.min_net_half;
  return out;
}

/// p_i: mass of p aggregated by nearest-center clustering at level i.
struct ClusterDistribution {
  int level = 0;
  std::vector<double> mass;  // indexed by position in N_i
};

inline ClusterDistribution cluster_distribution(const NetHierarchy& h, const Distribution& p,
                                                int i) {
  if (!p.space().same_as(h.space())) throw SpaceMismatch("distribution is not on the hierarchy's space");
  const NetLevel& lvl = h.level(i);
  ClusterDistribution out{i, std::vector<double>(lvl.size(), 0.0)};
  for (std::size_t y = 0; y < p.size(); ++y) out.mass[lvl.assign[y]] += p[y];
  return out;
}

struct SandwichViolation {
  int level;
  std::size_t center;  // position in N_i
  double inner;        // p(B(x_j, 2^{i-1}))
  double cluster;      // p_i(j)
  double outer;        // p(B(x_j, 2^i))
};

/// Exact check of p(B(x_j, 2^{i-1})) <= p_i(j) <= p(B(x_j, 2^i)) at every center of N_i.
inline std::vector<SandwichViolation> sandwich_violations(const NetHierarchy& h,
                                                          const Distribution& p, int i) {
  const auto pi = cluster_distribution(h, p, i);
  const NetLevel& lvl = h.level(i);
  std::vector<SandwichViolation> bad;
  for (std::size_t j = 0; j < lvl.size(); ++j) {
    const double inner = ball_mass(p, lvl.centers[j], pow2(i - 1));
    const double outer = ball_mass(p, lvl.centers[j], pow2(i));
    if (!(inner <= pi.mass[j] && pi.mass[j] <= outer))
      bad.push_back({i, j, inner, pi.mass[j], outer});
  }
  return bad;
}

struct DoublingWitness {
  std::size_t point;
  double radius;
  double ratio;
};

struct DoublingReport {
  double constant = 1.0;  // may be +infinity
  std::vector<DoublingWitness> witnesses;  // worst ratios, descending
  std::vector<double> radii_grid;

  bool finite() const { return std::isfinite(constant); }
};

/// Radii {2^i : i in [l-1, r]} used by default for the doubling estimate.
inline std::vector<double> default_doubling_radii(int l, int r) {
  std::vector<double> radii;
  for (int i = l - 1; i <= r; ++i) radii.push_back(pow2(i));
  return radii;
}

/// max over points x and grid radii of p(B(x,2r)) / p(B(x,r)); 0/0 counts as 1 and
/// positive/0 as +infinity.
inline DoublingReport doubling_constant(const Distribution& p, std::span<const double> radii,
                                        std::size_t keep_witnesses = 5) {
  if (radii.empty()) throw Error("doubling estimate needs a nonempty radius grid");
  const auto& space = p.space();
  DoublingReport rep;
  rep.radii_grid.assign(radii.begin(), radii.end());
  std::vector<DoublingWitness> all;
  for (std::size_t x = 0; x < space.size(); ++x) {
    for (double r : radii) {
      const double inner = ball_mass(p, x, r);
      const double outer = ball_mass(p, x, 2.0 * r);
      double ratio = 1.0;
      if (inner > 0.0)
        ratio = outer / inner;
      else if (outer > 0.0)
        ratio = std::numeric_limits<double>::infinity();
      all.push_back({x, r, ratio});
    }
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const DoublingWitness& a, const DoublingWitness& b) { return a.ratio > b.ratio; });
  rep.constant = all.front().ratio;
  all.resize(std::min(all.size(), keep_witnesses));
  rep.witnesses = std::move(all);
  return rep;
}

inline DoublingReport doubling_constant(const NetHierarchy& h, const Distribution& p) {
  const auto radii = default_doubling_radii(h.l(), h.r());
  return doubling_constant(p, radii);
}

}  // namespace netwit
