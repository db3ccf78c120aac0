#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "netwit/error.hpp"
#include "netwit/l1_testers.hpp"
#include "netwit/metric_space.hpp"
#include "netwit/nets.hpp"
#include "netwit/random.hpp"
#include "netwit/transport.hpp"

namespace netwit {

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

/// Lattice {0, h, ..., 1}^d, points in row-major order (first coordinate slowest).
struct GridSpace {
  FiniteMetricSpace space;
  std::size_t dim = 1;
  double h = 1.0;
  std::size_t steps = 1;  // 1/h
  PointMetric metric = PointMetric::linf;

  std::size_t side() const noexcept { return steps + 1; }

  /// Lattice coordinates (multiples of h) of point `x`.
  std::vector<std::size_t> lattice(std::size_t x) const {
    std::vector<std::size_t> t(dim);
    for (std::size_t k = dim; k-- > 0;) {
      t[k] = x % side();
      x /= side();
    }
    return t;
  }

  std::size_t index(std::span<const std::size_t> t) const {
    std::size_t x = 0;
    for (std::size_t k = 0; k < dim; ++k) x = x * side() + t[k];
    return x;
  }
};

inline GridSpace make_grid(std::size_t d, double h, PointMetric metric) {
  if (d == 0) throw ResolutionIncompatible("grid dimension must be at least 1");
  if (!(h > 0.0 && h <= 1.0)) throw ResolutionIncompatible("grid resolution must lie in (0, 1]");
  const double inv = 1.0 / h;
  const double rounded = std::round(inv);
  if (std::abs(inv - rounded) > 1e-9 * inv)
    throw ResolutionIncompatible("1/h must be an integer");
  const std::size_t steps = static_cast<std::size_t>(rounded);
  const std::size_t side = steps + 1;
  std::size_t n = 1;
  for (std::size_t k = 0; k < d; ++k) n *= side;
  std::vector<std::vector<double>> pts(n, std::vector<double>(d));
  for (std::size_t x = 0; x < n; ++x) {
    std::size_t rest = x;
    for (std::size_t k = d; k-- > 0;) {
      pts[x][k] = static_cast<double>(rest % side) / static_cast<double>(steps);
      rest /= side;
    }
  }
  return {FiniteMetricSpace::from_points(std::move(pts), metric), d, h, steps, metric};
}

/// Lattice net N_i = {(k_1 2^i, ..., k_d 2^i)} with the nearest-center map computed
/// coordinate-wise (ties toward the lower lattice value, i.e. the lowest center index).
/// For 2^i below the resolution every point is its own center.
inline NetLevel trivial_grid_level(const GridSpace& g, int i) {
  NetLevel lvl;
  lvl.level = i;
  lvl.scale = pow2(i);
  const std::size_t n = g.space.size();
  const double stride_f = pow2(i) * static_cast<double>(g.steps);
  if (stride_f < 1.0) {
    lvl.centers.resize(n);
    for (std::size_t x = 0; x < n; ++x) lvl.centers[x] = x;
    lvl.assign = lvl.centers;
    return lvl;
  }
  const auto stride = static_cast<std::size_t>(stride_f);
  if (static_cast<double>(stride) != stride_f || (stride <= g.steps && g.steps % stride != 0))
    throw ResolutionIncompatible("2^" + std::to_string(i) + " is not a multiple of the grid step");
  std::vector<std::size_t> position(n, std::numeric_limits<std::size_t>::max());
  for (std::size_t x = 0; x < n; ++x) {
    const auto t = g.lattice(x);
    if (std::all_of(t.begin(), t.end(), [&](std::size_t v) { return v % stride == 0; })) {
      position[x] = lvl.centers.size();
      lvl.centers.push_back(x);
    }
  }
  lvl.assign.resize(n);
  std::vector<std::size_t> c(g.dim);
  for (std::size_t x = 0; x < n; ++x) {
    const auto t = g.lattice(x);
    for (std::size_t k = 0; k < g.dim; ++k) {
      const std::size_t q = t[k] / stride, rem = t[k] % stride;
      c[k] = (2 * rem > stride ? q + 1 : q) * stride;
    }
    lvl.assign[x] = position[g.index(c)];
  }
  return lvl;
}

/// Level range of the lattice hierarchy on the unit cube: the lattice levels
/// [floor(log2(eps/8)), 0] plus the root level 1, where the lattice {k 2^1} meets
/// [0,1]^d only in the origin. (Level 0 holds the 2^d corners, so the root cannot sit
/// at ceil(log2 D) = 0.)
inline std::pair<int, int> lattice_level_range(double epsilon) {
  const auto [l, r] = NetHierarchy::level_range(epsilon, 1.0);
  return {std::min(l, 0), std::max(r, 1)};
}

/// The explicit lattice hierarchy on an L-infinity grid with 1/h a power of two.
/// Adjacent lattice centers sit exactly 2^i apart, so levels are checked with the
/// touching packing rule.
inline NetHierarchy trivial_grid_hierarchy(const GridSpace& g, double epsilon, bool validate = true) {
  if (g.metric != PointMetric::linf)
    throw ResolutionIncompatible("lattice nets are 2^i-nets only under the linf metric");
  if ((g.steps & (g.steps - 1)) != 0) throw ResolutionIncompatible("1/h must be a power of two");
  const auto [l, r] = lattice_level_range(epsilon);
  std::vector<NetLevel> levels;
  for (int i = l; i <= r; ++i) {
    levels.push_back(trivial_grid_level(g, i));
    if (validate) {
      const auto chk = validate_level(g.space, levels.back(), PackingRule::touching, false);
      if (!chk.ok()) throw ResolutionIncompatible("lattice level " + std::to_string(i) + ": " + chk.message);
    }
  }
  return {g.space, epsilon, l, r, std::move(levels)};
}

/// Mass classes of the cluster distribution p_i of the continuous uniform law on
/// [0,1]^d under the lattice net N_i (i <= 0): a center with b boundary coordinates
/// owns a cell of volume 2^{id} 2^{-b}. For i >= 1 the net is the origin alone.
inline std::vector<MassClass> uniform_cube_cluster_classes(std::size_t d, int i) {
  if (i >= 1) return {{1.0, 1.0}};
  std::vector<MassClass> out;
  const double cells = pow2(-i);  // lattice intervals per side
  double binom = 1.0;
  for (std::size_t b = 0; b <= d; ++b) {
    if (b > 0) binom = binom * static_cast<double>(d - b + 1) / static_cast<double>(b);
    const double mult = binom * std::pow(2.0, static_cast<double>(b)) *
                        std::pow(cells - 1.0, static_cast<double>(d - b));
    if (mult > 0.0)
      out.push_back({std::pow(pow2(i), static_cast<double>(d)) * std::pow(0.5, static_cast<double>(b)), mult});
  }
  return out;
}

/// |N_i| for the lattice net of the unit cube: (2^{-i} + 1)^d for i <= 0, else 1.
inline double lattice_net_size(std::size_t d, int i) {
  if (i >= 1) return 1.0;
  return std::pow(pow2(-i) + 1.0, static_cast<double>(d));
}

// ---------------------------------------------------------------------------
// Spaces and distributions
// ---------------------------------------------------------------------------

/// Uniformly random points in [0,1]^dim.
inline FiniteMetricSpace random_point_space(std::size_t n, std::size_t dim, PointMetric metric,
                                            std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
  for (auto& p : pts)
    for (auto& c : p) c = u(rng);
  return FiniteMetricSpace::from_points(std::move(pts), metric);
}

/// Shortest-path metric of a random weighted complete graph: a generic (non-normed)
/// finite metric with a dense validated matrix.
inline FiniteMetricSpace random_graph_metric(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> w(0.05, 1.0);
  std::vector<double> d(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) d[a * n + b] = d[b * n + a] = w(rng);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) d[a * n + b] = std::min(d[a * n + b], d[a * n + k] + d[k * n + b]);
  return FiniteMetricSpace::from_matrix(std::move(d), n);
}

/// Points 0, step, 2 step, ... on a line, dense matrix.
inline FiniteMetricSpace line_space(std::size_t n, double step = 1.0) {
  std::vector<double> d(n * n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      d[a * n + b] = std::abs(static_cast<double>(a) - static_cast<double>(b)) * step;
  return FiniteMetricSpace::from_matrix(std::move(d), n);
}

inline Distribution random_distribution(const FiniteMetricSpace& space, Rng& rng) {
  auto v = random_simplex_point(space.size(), rng);
  return {space, std::move(v)};
}

/// `heavy` mass on one point, the rest spread uniformly (full support).
inline Distribution near_point_mass(const FiniteMetricSpace& space, std::size_t at, double heavy) {
  const std::size_t n = space.size();
  if (n == 1) return Distribution::point_mass(space, 0);
  std::vector<double> m(n, (1.0 - heavy) / static_cast<double>(n - 1));
  m.at(at) = heavy;
  return {space, std::move(m)};
}

// ---------------------------------------------------------------------------
// Hard instances
// ---------------------------------------------------------------------------

/// Uniform p over [n] and q alternating (1 +- eps)/n; L1(p, q) = eps.
inline std::pair<std::vector<double>, std::vector<double>> paninski_pair(std::size_t n, double eps) {
  if (n == 0 || n % 2 != 0) throw OddSupport("Paninski pair needs an even support size");
  if (!(eps >= 0.0 && eps < 1.0)) throw Error("Paninski perturbation must lie in [0, 1)");
  const double u = 1.0 / static_cast<double>(n);
  std::vector<double> p(n, u), q(n);
  for (std::size_t j = 0; j < n; ++j) q[j] = (j % 2 == 0 ? 1.0 + eps : 1.0 - eps) * u;
  return {std::move(p), std::move(q)};
}

/// u'(x_j) = u(j) on the centers of a net level.
inline Distribution embed_l1_instance(const FiniteMetricSpace& space, const NetLevel& level,
                                      std::span<const double> u) {
  if (u.size() != level.size())
    throw SizeMismatch("L1 instance has " + std::to_string(u.size()) + " entries for " +
                       std::to_string(level.size()) + " centers");
  std::vector<double> m(space.size(), 0.0);
  for (std::size_t j = 0; j < u.size(); ++j) m[level.centers[j]] = u[j];
  return {space, std::move(m)};
}

/// A q paired with an exact Wasserstein certificate against p.
struct CertifiedInstance {
  Distribution q;
  double wasserstein = 0.0;
  double epsilon = 0.0;
  bool far = false;  // wasserstein >= epsilon
};

/// Certifies W_d(p, q) >= eps with the exact solver (and its dual certificate).
inline CertifiedInstance certify_far(const Distribution& p, const Distribution& q, double epsilon) {
  const auto plan = wasserstein_exact(p, q);
  const auto cert = verify_certificate(p, q, plan);
  if (!cert.valid) throw UncertifiedInstance("transport certificate failed: " + cert.message);
  if (plan.cost < epsilon)
    throw UncertifiedInstance("W_d(p,q) = " + std::to_string(plan.cost) + " is below epsilon " +
                              std::to_string(epsilon));
  return {q, plan.cost, epsilon, true};
}

/// q = (1 - a) p + a delta_z with z maximizing E_p d(., z); W_d(p, q) = a E_p d(., z)
/// exactly, and a is chosen as `slack` * eps / E_p d(., z). Certified with the exact solver.
inline CertifiedInstance far_instance(const Distribution& p, double epsilon, double slack = 1.05) {
  const auto& space = p.space();
  std::size_t z = 0;
  double best = -1.0;
  for (std::size_t x = 0; x < space.size(); ++x) {
    double acc = 0.0;
    for (std::size_t y = 0; y < space.size(); ++y) acc += p[y] * space(y, x);
    if (acc > best) {
      best = acc;
      z = x;
    }
  }
  if (best < epsilon)
    throw UncertifiedInstance("no point-mass shift reaches Wasserstein distance epsilon");
  const double a = std::min(1.0, slack * epsilon / best);
  std::vector<double> m(p.vector());
  for (auto& v : m) v *= 1.0 - a;
  m[z] += a;
  return certify_far(p, Distribution(space, std::move(m)), epsilon);
}

// ---------------------------------------------------------------------------
// q* reduction sampler
// ---------------------------------------------------------------------------

/// Turns a discrete q over the centers of N_i into q* on X: draw j ~ q, emit x_j with
/// probability p(B(x_j, 2^{i-1})) / p_i(j), otherwise the anchor y.
class QStarSampler {
 public:
  QStarSampler(std::vector<std::size_t> centers, std::vector<double> accept, std::size_t anchor,
               std::vector<double> q, std::size_t space_size, std::uint64_t seed)
      : centers_(std::move(centers)),
        accept_(std::move(accept)),
        anchor_(anchor),
        q_(std::move(q)),
        n_(space_size),
        base_(q_, derive_seed(seed, 1, 0)),
        coin_rng_(derive_seed(seed, 2, 0)) {}

  std::optional<std::size_t> next() {
    const std::size_t j = base_.draw();
    return coin_(coin_rng_) < accept_[j] ? centers_[j] : anchor_;
  }

  std::size_t anchor() const noexcept { return anchor_; }
  const std::vector<double>& accept_probs() const noexcept { return accept_; }
  const std::vector<std::size_t>& centers() const noexcept { return centers_; }

  /// Exact law of the emitted points.
  std::vector<double> induced() const {
    std::vector<double> m(n_, 0.0);
    for (std::size_t j = 0; j < q_.size(); ++j) {
      m[centers_[j]] += q_[j] * accept_[j];
      m[anchor_] += q_[j] * (1.0 - accept_[j]);
    }
    return m;
  }

 private:
  std::vector<std::size_t> centers_;
  std::vector<double> accept_;
  std::size_t anchor_;
  std::vector<double> q_;
  std::size_t n_;
  VectorSampler base_;
  Rng coin_rng_;
  std::uniform_real_distribution<double> coin_{0.0, 1.0};
};

/// Lowest-index point outside every ball B(x_j, 2^{i-1}) around the centers of N_i.
inline std::optional<std::size_t> qstar_anchor(const NetHierarchy& h, int i) {
  const auto& space = h.space();
  const NetLevel& lvl = h.level(i);
  const double radius = pow2(i - 1);
  for (std::size_t y = 0; y < space.size(); ++y) {
    bool outside = true;
    for (std::size_t c : lvl.centers)
      if (space(y, c) <= radius) {
        outside = false;
        break;
      }
    if (outside) return y;
  }
  return std::nullopt;
}

inline QStarSampler build_qstar(const Distribution& p, const NetHierarchy& h, int i,
                                std::span<const double> q, std::uint64_t seed) {
  if (!p.space().same_as(h.space())) throw SpaceMismatch("p is not on the hierarchy's space");
  const NetLevel& lvl = h.level(i);
  if (q.size() != lvl.size())
    throw SizeMismatch("q must be a distribution over the " + std::to_string(lvl.size()) + " centers");
  const auto anchor = qstar_anchor(h, i);
  if (!anchor) throw NoAnchorPoint("every point lies in some ball B(x_j, 2^{i-1})");
  const auto pi = cluster_distribution(h, p, i);
  std::vector<double> accept(lvl.size(), 0.0);
  for (std::size_t j = 0; j < lvl.size(); ++j) {
    if (pi.mass[j] <= 0.0) {
      if (q[j] > 0.0) throw ZeroClusterMass("q puts mass on an empty cluster " + std::to_string(j));
      continue;
    }
    accept[j] = ball_mass(p, lvl.centers[j], pow2(i - 1)) / pi.mass[j];
    if (!(accept[j] >= 0.0 && accept[j] <= 1.0))
      throw Error("acceptance probability outside [0,1] at center " + std::to_string(j));
  }
  return {lvl.centers, std::move(accept), *anchor, std::vector<double>(q.begin(), q.end()),
          p.size(), seed};
}

}  // namespace netwit
