#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "netwit/error.hpp"
#include "netwit/metric_space.hpp"

namespace netwit {

struct FlowEntry {
  std::size_t source;
  std::size_t target;
  double mass;
};

/// Optimal coupling between two distributions together with the dual potentials that
/// certify its optimality: u[a] + v[b] <= cost(a,b) everywhere, with equality wherever
/// mass flows.
struct TransportPlan {
  std::size_t n = 0;
  std::vector<FlowEntry> flow;  // nonzero entries only
  double cost = 0.0;
  std::vector<double> source_potential;
  std::vector<double> target_potential;

  std::vector<double> dense() const {
    std::vector<double> out(n * n, 0.0);
    for (const auto& f : flow) out[f.source * n + f.target] += f.mass;
    return out;
  }
};

namespace detail {

// Flows and residual masses below this are treated as exhausted.
inline constexpr double kFlowZero = 1e-15;

}  // namespace detail

/// Exact min-cost transport between `supply` and `demand` (both length n, nonnegative,
/// equal totals up to rounding) under an arbitrary nonnegative cost `cost(a, b)`.
///
/// Successive shortest paths on the complete bipartite graph between the two supports,
/// with Johnson potentials and dense Dijkstra; complexity is driven by the support sizes.
template <class CostFn>
TransportPlan min_cost_transport(std::span<const double> supply, std::span<const double> demand,
                                 CostFn&& cost) {
  if (supply.size() != demand.size())
    throw SizeMismatch("supply and demand vectors differ in length");
  const std::size_t n = supply.size();
  std::vector<std::size_t> src, dst;
  for (std::size_t a = 0; a < n; ++a) {
    if (supply[a] > 0.0) src.push_back(a);
    if (demand[a] > 0.0) dst.push_back(a);
  }
  const std::size_t ns = src.size(), nt = dst.size();
  TransportPlan plan;
  plan.n = n;
  plan.source_potential.assign(n, 0.0);
  plan.target_potential.assign(n, 0.0);
  if (ns == 0 || nt == 0) return plan;

  std::vector<double> c(ns * nt);
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = 0; j < nt; ++j) c[i * nt + j] = cost(src[i], dst[j]);

  std::vector<double> flow(ns * nt, 0.0);
  std::vector<double> rem_s(ns), rem_t(nt);
  for (std::size_t i = 0; i < ns; ++i) rem_s[i] = supply[src[i]];
  for (std::size_t j = 0; j < nt; ++j) rem_t[j] = demand[dst[j]];

  const std::size_t nv = ns + nt;
  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<double> pi(nv, 0.0), dist(nv);
  std::vector<std::size_t> prev(nv);
  std::vector<char> done(nv);

  const std::size_t max_rounds = 4 * nv * nv + 16;
  for (std::size_t round = 0;; ++round) {
    if (round > max_rounds) throw Error("transport solver failed to converge");
    bool any_supply = false, any_demand = false;
    for (double r : rem_s) any_supply |= r > detail::kFlowZero;
    for (double r : rem_t) any_demand |= r > detail::kFlowZero;
    if (!any_supply || !any_demand) break;

    std::fill(dist.begin(), dist.end(), inf);
    std::fill(prev.begin(), prev.end(), none);
    std::fill(done.begin(), done.end(), 0);
    for (std::size_t i = 0; i < ns; ++i)
      if (rem_s[i] > detail::kFlowZero) dist[i] = 0.0;

    std::size_t sink = none;
    for (std::size_t it = 0; it < nv; ++it) {
      std::size_t u = none;
      for (std::size_t v = 0; v < nv; ++v)
        if (!done[v] && dist[v] < inf && (u == none || dist[v] < dist[u])) u = v;
      if (u == none) break;
      done[u] = 1;
      if (u >= ns && rem_t[u - ns] > detail::kFlowZero) {
        sink = u;
        break;
      }
      if (u < ns) {
        for (std::size_t j = 0; j < nt; ++j) {
          const std::size_t v = ns + j;
          if (done[v]) continue;
          const double rc = std::max(0.0, c[u * nt + j] + pi[u] - pi[v]);
          if (dist[u] + rc < dist[v]) {
            dist[v] = dist[u] + rc;
            prev[v] = u;
          }
        }
      } else {
        const std::size_t j = u - ns;
        for (std::size_t i = 0; i < ns; ++i) {
          if (done[i] || flow[i * nt + j] <= 0.0) continue;
          const double rc = std::max(0.0, -c[i * nt + j] + pi[u] - pi[i]);
          if (dist[u] + rc < dist[i]) {
            dist[i] = dist[u] + rc;
            prev[i] = u;
          }
        }
      }
    }
    if (sink == none) throw Error("transport solver: no augmenting path");

    const double dt = dist[sink];
    for (std::size_t v = 0; v < nv; ++v) pi[v] += std::min(dist[v], dt);

    // Bottleneck along the path sink <- ... <- source.
    double amount = rem_t[sink - ns];
    std::size_t v = sink;
    while (prev[v] != none) {
      const std::size_t u = prev[v];
      if (u >= ns) amount = std::min(amount, flow[v * nt + (u - ns)]);  // reverse edge
      v = u;
    }
    const std::size_t root = v;
    amount = std::min(amount, rem_s[root]);

    v = sink;
    while (prev[v] != none) {
      const std::size_t u = prev[v];
      if (u < ns) {
        flow[u * nt + (v - ns)] += amount;
      } else {
        double& f = flow[v * nt + (u - ns)];
        f -= amount;
        if (f < detail::kFlowZero) f = 0.0;
      }
      v = u;
    }
    rem_s[root] -= amount;
    rem_t[sink - ns] -= amount;
    if (rem_s[root] < detail::kFlowZero) rem_s[root] = 0.0;
    if (rem_t[sink - ns] < detail::kFlowZero) rem_t[sink - ns] = 0.0;
  }

  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = 0; j < nt; ++j) {
      const double f = flow[i * nt + j];
      if (f > 0.0) {
        plan.flow.push_back({src[i], dst[j], f});
        plan.cost += f * c[i * nt + j];
      }
    }

  // Potentials on the supports come straight from the solver; extend them to every
  // point so that the dual constraint holds on all n x n pairs.
  constexpr double unset = std::numeric_limits<double>::quiet_NaN();
  std::vector<double>& u = plan.source_potential;
  std::vector<double>& w = plan.target_potential;
  std::fill(u.begin(), u.end(), unset);
  std::fill(w.begin(), w.end(), unset);
  for (std::size_t i = 0; i < ns; ++i) u[src[i]] = -pi[i];
  for (std::size_t j = 0; j < nt; ++j) w[dst[j]] = pi[ns + j];
  for (std::size_t a = 0; a < n; ++a) {
    if (!std::isnan(u[a])) continue;
    double best = inf;
    for (std::size_t b : dst) best = std::min(best, cost(a, b) - w[b]);
    u[a] = best;
  }
  for (std::size_t b = 0; b < n; ++b) {
    if (!std::isnan(w[b])) continue;
    double best = inf;
    for (std::size_t a = 0; a < n; ++a) best = std::min(best, cost(a, b) - u[a]);
    w[b] = best;
  }
  return plan;
}

struct CertificateReport {
  bool valid = true;
  double max_marginal_error = 0.0;
  double max_dual_violation = 0.0;   // max(u_a + v_b - cost(a,b)), clipped at 0
  double max_slackness_gap = 0.0;    // on pairs carrying flow
  double duality_gap = 0.0;          // |primal - dual|
  std::string message;
};

/// Independently re-checks a plan: marginals, recomputed cost, dual feasibility on every
/// pair, complementary slackness on the flow support, and zero duality gap.
template <class CostFn>
CertificateReport verify_certificate(std::span<const double> supply, std::span<const double> demand,
                                     CostFn&& cost, const TransportPlan& plan,
                                     Tolerances tol = {}) {
  CertificateReport rep;
  const std::size_t n = supply.size();
  auto fail = [&](const std::string& why) {
    if (rep.valid) rep.message = why;
    rep.valid = false;
  };
  if (plan.n != n || demand.size() != n || plan.source_potential.size() != n ||
      plan.target_potential.size() != n) {
    fail("plan dimensions do not match the marginals");
    return rep;
  }
  std::vector<double> rows(n, 0.0), cols(n, 0.0);
  double primal = 0.0;
  for (const auto& f : plan.flow) {
    if (f.mass < 0.0) fail("negative flow entry");
    rows[f.source] += f.mass;
    cols[f.target] += f.mass;
    primal += f.mass * cost(f.source, f.target);
    const double gap =
        std::abs(plan.source_potential[f.source] + plan.target_potential[f.target] -
                 cost(f.source, f.target));
    rep.max_slackness_gap = std::max(rep.max_slackness_gap, gap);
  }
  for (std::size_t a = 0; a < n; ++a) {
    rep.max_marginal_error = std::max(rep.max_marginal_error, std::abs(rows[a] - supply[a]));
    rep.max_marginal_error = std::max(rep.max_marginal_error, std::abs(cols[a] - demand[a]));
  }
  if (std::abs(primal - plan.cost) > 1e-9 * std::max(1.0, std::abs(primal)))
    fail("reported cost does not match the flow");
  double dual = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    dual += supply[a] * plan.source_potential[a] + demand[a] * plan.target_potential[a];
    for (std::size_t b = 0; b < n; ++b) {
      const double v = plan.source_potential[a] + plan.target_potential[b] - cost(a, b);
      rep.max_dual_violation = std::max(rep.max_dual_violation, v);
    }
  }
  rep.duality_gap = std::abs(primal - dual);
  if (rep.max_marginal_error > tol.mass) fail("marginal constraint violated");
  if (rep.max_dual_violation > tol.dual) fail("dual potentials infeasible");
  if (rep.max_slackness_gap > tol.dual) fail("complementary slackness violated");
  if (rep.duality_gap > tol.dual) fail("nonzero duality gap");
  return rep;
}

/// Exact 1-Wasserstein distance with the optimal coupling and its dual certificate.
inline TransportPlan wasserstein_exact(const Distribution& p, const Distribution& q) {
  require_same_space(p, q);
  const auto& space = p.space();
  return min_cost_transport(p.mass(), q.mass(),
                            [&space](std::size_t a, std::size_t b) { return space(a, b); });
}

inline CertificateReport verify_certificate(const Distribution& p, const Distribution& q,
                                            const TransportPlan& plan, Tolerances tol = {}) {
  require_same_space(p, q);
  const auto& space = p.space();
  return verify_certificate(
      p.mass(), q.mass(), [&space](std::size_t a, std::size_t b) { return space(a, b); }, plan,
      tol);
}

struct PackingBound {
  double value = 0.0;
  /// True when, inside every ball, all of q's mass sits on the center. This is the
  /// concentration condition under which the bound is compared against the exact cost.
  bool q_concentrated = false;
};

/// Sum over centers of radius * |p(B(c,radius)) - q(B(c,radius))| for pairwise disjoint
/// closed balls.
inline PackingBound wasserstein_lower_bound_packing(const Distribution& p, const Distribution& q,
                                                    std::span<const std::size_t> centers,
                                                    double radius) {
  require_same_space(p, q);
  const auto& space = p.space();
  std::vector<int> owner(space.size(), -1);
  for (std::size_t k = 0; k < centers.size(); ++k) {
    for (std::size_t y = 0; y < space.size(); ++y) {
      if (space(centers[k], y) > radius) continue;
      if (owner[y] >= 0)
        throw OverlappingBalls("balls around centers " + std::to_string(centers[owner[y]]) +
                               " and " + std::to_string(centers[k]) + " share point " +
                               std::to_string(y));
      owner[y] = static_cast<int>(k);
    }
  }
  PackingBound out;
  out.q_concentrated = true;
  std::vector<double> pb(centers.size(), 0.0), qb(centers.size(), 0.0);
  for (std::size_t y = 0; y < space.size(); ++y) {
    if (owner[y] < 0) continue;
    pb[owner[y]] += p[y];
    qb[owner[y]] += q[y];
    if (y != centers[owner[y]] && q[y] > 0.0) out.q_concentrated = false;
  }
  for (std::size_t k = 0; k < centers.size(); ++k) out.value += radius * std::abs(pb[k] - qb[k]);
  return out;
}

}  // namespace netwit
