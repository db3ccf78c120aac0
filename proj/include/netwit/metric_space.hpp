#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "netwit/error.hpp"

namespace netwit {

/// Numerical slack used across the library. Both fields are configurable per call site.
struct Tolerances {
  double mass = 1e-9;  ///< marginal / normalization slack
  double dual = 1e-7;  ///< dual feasibility and complementary slackness slack
};

enum class PointMetric { euclidean, linf };

inline std::string to_string(PointMetric m) {
  return m == PointMetric::euclidean ? "euclidean" : "linf";
}

inline PointMetric parse_point_metric(const std::string& name) {
  if (name == "euclidean" || name == "l2") return PointMetric::euclidean;
  if (name == "linf" || name == "chebyshev") return PointMetric::linf;
  throw FormatError("unknown point metric '" + name + "' (expected euclidean|linf)");
}

/// A finite (pseudo)metric space.
///
/// Backed either by a dense validated distance matrix or by a point cloud with a
/// coordinate metric; the latter never materializes the n x n matrix. Copies are
/// cheap handles onto shared immutable storage, and two handles denote the same
/// space iff they share storage.
class FiniteMetricSpace {
 public:
  /// Builds a space from a row-major n x n matrix, validating the metric axioms.
  /// Zero distances between distinct points are allowed (pseudometric).
  static FiniteMetricSpace from_matrix(std::vector<double> dist, std::size_t n,
                                       std::vector<std::string> labels = {},
                                       double triangle_slack = 1e-12) {
    if (dist.size() != n * n)
      throw InvalidMatrix("distance matrix has " + std::to_string(dist.size()) +
                          " entries, expected " + std::to_string(n * n));
    if (!labels.empty() && labels.size() != n)
      throw InvalidMatrix("label count does not match point count");
    if (n == 0) throw InvalidMatrix("a metric space needs at least one point");
    double diameter = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        const double v = dist[a * n + b];
        if (!std::isfinite(v)) throw InvalidMatrix("non-finite distance entry");
        if (v < 0.0)
          throw NegativeDistance("negative distance d(" + std::to_string(a) + "," +
                                 std::to_string(b) + ")");
        diameter = std::max(diameter, v);
      }
      if (dist[a * n + a] != 0.0)
        throw InvalidMatrix("nonzero self distance at point " + std::to_string(a));
    }
    const double slack = triangle_slack * std::max(1.0, diameter);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b)
        if (std::abs(dist[a * n + b] - dist[b * n + a]) > slack)
          throw AsymmetryError("d(" + std::to_string(a) + "," + std::to_string(b) +
                               ") != d(" + std::to_string(b) + "," + std::to_string(a) + ")");
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t a = 0; a < n; ++a) {
        const double ab = dist[a * n + b];
        for (std::size_t c = 0; c < n; ++c) {
          if (dist[a * n + c] > ab + dist[b * n + c] + slack) {
            std::ostringstream msg;
            msg << "triangle inequality violated: d(" << a << "," << c << ")=" << dist[a * n + c]
                << " > d(" << a << "," << b << ")+d(" << b << "," << c
                << ")=" << ab + dist[b * n + c];
            throw TriangleViolation(a, b, c, msg.str());
          }
        }
      }
    auto s = std::make_shared<Storage>();
    s->n = n;
    s->matrix = std::move(dist);
    s->labels = std::move(labels);
    s->diameter = diameter;
    return FiniteMetricSpace(std::move(s));
  }

  /// Convenience overload taking nested rows.
  static FiniteMetricSpace from_rows(const std::vector<std::vector<double>>& rows,
                                     std::vector<std::string> labels = {}) {
    const std::size_t n = rows.size();
    std::vector<double> flat;
    flat.reserve(n * n);
    for (const auto& row : rows) {
      if (row.size() != n) throw InvalidMatrix("distance matrix is not square");
      flat.insert(flat.end(), row.begin(), row.end());
    }
    return from_matrix(std::move(flat), n, std::move(labels));
  }

  /// Builds a space from coordinates; distances are evaluated on demand.
  static FiniteMetricSpace from_points(std::vector<std::vector<double>> points, PointMetric metric,
                                       std::vector<std::string> labels = {}) {
    if (points.empty()) throw InvalidMatrix("a metric space needs at least one point");
    const std::size_t dim = points.front().size();
    for (const auto& pt : points) {
      if (pt.size() != dim) throw InvalidMatrix("points have inconsistent dimension");
      for (double c : pt)
        if (!std::isfinite(c)) throw InvalidMatrix("non-finite coordinate");
    }
    if (!labels.empty() && labels.size() != points.size())
      throw InvalidMatrix("label count does not match point count");
    auto s = std::make_shared<Storage>();
    s->n = points.size();
    s->dim = dim;
    s->metric = metric;
    s->coords.reserve(points.size() * dim);
    for (const auto& pt : points) s->coords.insert(s->coords.end(), pt.begin(), pt.end());
    s->labels = std::move(labels);
    FiniteMetricSpace space(s);
    s->diameter = space.compute_point_diameter();
    return space;
  }

  std::size_t size() const noexcept { return storage_->n; }
  double diameter() const noexcept { return storage_->diameter; }
  bool has_matrix() const noexcept { return !storage_->matrix.empty() || storage_->coords.empty(); }
  bool has_points() const noexcept { return !storage_->coords.empty(); }
  std::size_t dimension() const noexcept { return storage_->dim; }
  std::optional<PointMetric> point_metric() const {
    if (!has_points()) return std::nullopt;
    return storage_->metric;
  }
  std::span<const double> point(std::size_t a) const {
    return {storage_->coords.data() + a * storage_->dim, storage_->dim};
  }
  const std::vector<std::string>& labels() const noexcept { return storage_->labels; }

  double operator()(std::size_t a, std::size_t b) const {
    const Storage& s = *storage_;
    if (!s.coords.empty()) return coord_distance(a, b);
    return s.matrix[a * s.n + b];
  }
  double distance(std::size_t a, std::size_t b) const { return (*this)(a, b); }

  /// Dense copy of the distance matrix (row-major).
  std::vector<double> matrix() const {
    if (!storage_->matrix.empty()) return storage_->matrix;
    const std::size_t n = size();
    std::vector<double> out(n * n);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) out[a * n + b] = (*this)(a, b);
    return out;
  }

  bool same_as(const FiniteMetricSpace& other) const noexcept {
    return storage_ == other.storage_;
  }

 private:
  struct Storage {
    std::size_t n = 0;
    std::vector<double> matrix;
    std::vector<double> coords;
    std::size_t dim = 0;
    PointMetric metric = PointMetric::euclidean;
    std::vector<std::string> labels;
    double diameter = 0.0;
  };

  explicit FiniteMetricSpace(std::shared_ptr<const Storage> s) : storage_(std::move(s)) {}

  double coord_distance(std::size_t a, std::size_t b) const {
    const Storage& s = *storage_;
    const double* x = s.coords.data() + a * s.dim;
    const double* y = s.coords.data() + b * s.dim;
    if (s.metric == PointMetric::linf) {
      double m = 0.0;
      for (std::size_t k = 0; k < s.dim; ++k) m = std::max(m, std::abs(x[k] - y[k]));
      return m;
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < s.dim; ++k) {
      const double t = x[k] - y[k];
      acc += t * t;
    }
    return std::sqrt(acc);
  }

  double compute_point_diameter() const {
    const Storage& s = *storage_;
    if (s.metric == PointMetric::linf) {
      // L-infinity diameter is the widest coordinate extent.
      double d = 0.0;
      for (std::size_t k = 0; k < s.dim; ++k) {
        double lo = s.coords[k], hi = s.coords[k];
        for (std::size_t a = 1; a < s.n; ++a) {
          lo = std::min(lo, s.coords[a * s.dim + k]);
          hi = std::max(hi, s.coords[a * s.dim + k]);
        }
        d = std::max(d, hi - lo);
      }
      return d;
    }
    double d = 0.0;
    for (std::size_t a = 0; a < s.n; ++a)
      for (std::size_t b = a + 1; b < s.n; ++b) d = std::max(d, coord_distance(a, b));
    return d;
  }

  std::shared_ptr<const Storage> storage_;
};

/// Probability vector over the points of a space.
class Distribution {
 public:
  Distribution(FiniteMetricSpace space, std::vector<double> mass, double tol = Tolerances{}.mass)
      : space_(std::move(space)), mass_(std::move(mass)) {
    if (mass_.size() != space_.size())
      throw SizeMismatch("distribution has " + std::to_string(mass_.size()) +
                         " entries for a space of " + std::to_string(space_.size()) + " points");
    double total = 0.0;
    for (double m : mass_) {
      if (!std::isfinite(m) || m < 0.0)
        throw InvalidDistribution("distribution entries must be finite and nonnegative");
      total += m;
    }
    if (std::abs(total - 1.0) > tol)
      throw InvalidDistribution("distribution sums to " + std::to_string(total));
  }

  static Distribution uniform(const FiniteMetricSpace& space) {
    return {space, std::vector<double>(space.size(), 1.0 / static_cast<double>(space.size()))};
  }

  static Distribution point_mass(const FiniteMetricSpace& space, std::size_t at) {
    std::vector<double> m(space.size(), 0.0);
    m.at(at) = 1.0;
    return {space, std::move(m)};
  }

  const FiniteMetricSpace& space() const noexcept { return space_; }
  std::span<const double> mass() const noexcept { return mass_; }
  const std::vector<double>& vector() const noexcept { return mass_; }
  double operator[](std::size_t a) const { return mass_[a]; }
  std::size_t size() const noexcept { return mass_.size(); }

  std::vector<std::size_t> support() const {
    std::vector<std::size_t> s;
    for (std::size_t a = 0; a < mass_.size(); ++a)
      if (mass_[a] > 0.0) s.push_back(a);
    return s;
  }

 private:
  FiniteMetricSpace space_;
  std::vector<double> mass_;
};

inline void require_same_space(const Distribution& p, const Distribution& q) {
  if (!p.space().same_as(q.space()))
    throw SpaceMismatch("distributions live on different spaces");
}

/// Sum of absolute differences of two probability vectors of equal length.
inline double l1_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw SizeMismatch("L1 distance of vectors with different lengths");
  double acc = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) acc += std::abs(p[j] - q[j]);
  return acc;
}

inline double l1_distance(const Distribution& p, const Distribution& q) {
  require_same_space(p, q);
  return l1_distance(p.mass(), q.mass());
}

/// Mass of the closed ball B(center, radius). Summed in point-index order, so the
/// result is monotone under set inclusion even in floating point.
inline double ball_mass(const Distribution& p, std::size_t center, double radius) {
  const auto& space = p.space();
  double acc = 0.0;
  for (std::size_t y = 0; y < space.size(); ++y)
    if (space(center, y) <= radius) acc += p[y];
  return acc;
}

inline std::vector<std::size_t> ball(const FiniteMetricSpace& space, std::size_t center,
                                     double radius) {
  std::vector<std::size_t> out;
  for (std::size_t y = 0; y < space.size(); ++y)
    if (space(center, y) <= radius) out.push_back(y);
  return out;
}

}  // namespace netwit
