#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netwit/error.hpp"
#include "netwit/l1_testers.hpp"
#include "netwit/metric_space.hpp"
#include "netwit/nets.hpp"
#include "netwit/random.hpp"
#include "netwit/tree.hpp"

namespace netwit {

enum class WitMode { worst, instance };

inline std::string to_string(WitMode m) { return m == WitMode::worst ? "worst" : "instance"; }

inline WitMode parse_wit_mode(const std::string& s) {
  if (s == "worst") return WitMode::worst;
  if (s == "instance") return WitMode::instance;
  throw FormatError("unknown mode '" + s + "' (expected worst|instance)");
}

/// Tester configuration. Defaults for the two constants come from the calibration
/// sweep on the 2-D grid family (see `netwit calibrate`).
struct WitConfig {
  double epsilon = 0.2;
  double budget_constant = 1.0;            // c in the sample budgets
  double level_proximity_constant = 0.375; // c2 in eps_i = c2 2^{-i} eps / (r - l)
  double delta_total = 1.0 / 3.0;
  std::size_t median_repetitions = 1;
  std::size_t calibration_trials = 2000;
  CalibrationCache* cache = nullptr;

  void validate() const {
    if (!(epsilon > 0.0)) throw EpsilonOutOfRange("epsilon must be positive");
    if (!(budget_constant > 0.0) || !(level_proximity_constant > 0.0))
      throw Error("tester constants must be positive");
    if (!(delta_total > 0.0 && delta_total < 0.5)) throw Error("delta_total must lie in (0, 1/2)");
    if (median_repetitions == 0 || median_repetitions % 2 == 0)
      throw Error("median repetitions must be odd");
  }
};

struct LevelOutcome {
  int level = 0;
  double proximity = 0.0;
  double failure_prob = 0.0;
  Verdict verdict = Verdict::accept;
  std::uint64_t samples_charged = 0;
  std::size_t support = 0;
  std::optional<L1Decision> decision;  // present when median_repetitions == 1
};

struct TesterReport {
  WitMode mode = WitMode::worst;
  Verdict verdict = Verdict::accept;
  std::vector<LevelOutcome> per_level;
  std::uint64_t total_samples = 0;
  std::uint64_t budget_formula_value = 0;
  double epsilon = 0.0;
  int l = 0, r = 0;
  std::optional<std::uint64_t> seed;
  std::optional<double> doubling_constant;
  std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// Budgets
// ---------------------------------------------------------------------------

/// Per-level quantities the budget formulas depend on.
struct LevelProfile {
  int level = 0;
  double net_size = 1.0;
  double truncated_norm = 0.0;  // ||p_i^{-max}_{-2^{-i-4} eps}||_{2/3}; instance budget only
};

/// log2(D/eps), floored at 1 so the polylog factor never shrinks a budget.
inline double log_ratio(double diameter, double epsilon) {
  if (!(diameter > 0.0)) return 1.0;
  return std::max(1.0, std::log2(diameter / epsilon));
}

inline double polylog_factor(double diameter, double epsilon) {
  const double L = log_ratio(diameter, epsilon);
  return L * L * L;
}

/// max_i 2^{2i} sqrt(|N_i|) / eps^2
inline double budget_worst_core(std::span<const LevelProfile> levels, double epsilon) {
  double best = 0.0;
  for (const auto& lv : levels)
    best = std::max(best, pow2(2 * lv.level) * std::sqrt(lv.net_size) / (epsilon * epsilon));
  return best;
}

/// max_i max{2^{2i} eps^{-2} ||p_i trunc||_{2/3}, 2^i eps^{-1}}
inline double budget_instance_core(std::span<const LevelProfile> levels, double epsilon) {
  double best = 0.0;
  for (const auto& lv : levels) {
    const double a = pow2(2 * lv.level) * lv.truncated_norm / (epsilon * epsilon);
    const double b = pow2(lv.level) / epsilon;
    best = std::max({best, a, b});
  }
  return best;
}

inline std::uint64_t budget_from_core(double core, double diameter, const WitConfig& cfg) {
  return static_cast<std::uint64_t>(
      std::ceil(cfg.budget_constant * polylog_factor(diameter, cfg.epsilon) * core));
}

inline std::vector<LevelProfile> worst_profile(const NetHierarchy& h) {
  std::vector<LevelProfile> out;
  for (int i = h.l(); i <= h.r(); ++i)
    out.push_back({i, static_cast<double>(h.level(i).size()), 0.0});
  return out;
}

/// Truncated norms of the cluster distributions p_i, truncation 2^{-i-4} eps.
inline std::vector<LevelProfile> instance_profile(const NetHierarchy& h, const Distribution& p,
                                                  double epsilon) {
  std::vector<LevelProfile> out;
  for (int i = h.l(); i <= h.r(); ++i) {
    const auto pi = cluster_distribution(h, p, i);
    const double cut = std::min(pow2(-i - 4) * epsilon, std::nextafter(1.0, 0.0));
    const auto t = truncate_minus_max_minus_eps(pi.mass, cut);
    out.push_back({i, static_cast<double>(pi.mass.size()), quasinorm_two_thirds(t.remaining)});
  }
  return out;
}

/// ceil(c log^3(D/eps) max_i 2^{2i} sqrt|N_i| / eps^2)
inline std::uint64_t budget_worst(const NetHierarchy& h, const WitConfig& cfg) {
  const auto prof = worst_profile(h);
  return budget_from_core(budget_worst_core(prof, cfg.epsilon), h.space().diameter(), cfg);
}

/// ceil(c log^3(D/eps) max_i max{2^{2i} eps^{-2} ||p_i trunc||_{2/3}, 2^i / eps})
inline std::uint64_t budget_instance(const NetHierarchy& h, const Distribution& p,
                                     const WitConfig& cfg) {
  const auto prof = instance_profile(h, p, cfg.epsilon);
  return budget_from_core(budget_instance_core(prof, cfg.epsilon), h.space().diameter(), cfg);
}

/// Sub-tester proximity at level i: c2 2^{-i} eps / (r - l), capped at 2.
inline double level_proximity(int i, int l, int r, const WitConfig& cfg) {
  const double span = std::max(1, r - l);
  return std::min(2.0, cfg.level_proximity_constant * pow2(-i) * cfg.epsilon / span);
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

namespace detail {

inline TesterReport run_levels(const NetHierarchy& h, const TreeEmbedding& tree,
                               const Distribution& p, std::span<const std::size_t> draws,
                               const WitConfig& cfg, WitMode mode, std::uint64_t budget) {
  TesterReport rep;
  rep.mode = mode;
  rep.epsilon = cfg.epsilon;
  rep.l = h.l();
  rep.r = h.r();
  rep.total_samples = draws.size();
  rep.budget_formula_value = budget;
  const L1Flavor flavor = mode == WitMode::worst ? L1Flavor::worst_case : L1Flavor::instance_optimal;
  const double delta = cfg.delta_total / static_cast<double>(h.r() - h.l() + 1);
  const L1Settings settings{cfg.budget_constant, cfg.calibration_trials, cfg.cache};

  std::vector<std::size_t> level_draws(draws.size());
  for (int i = h.l(); i < h.r(); ++i) {
    const auto anc = tree.ancestors(i);
    for (std::size_t k = 0; k < draws.size(); ++k) level_draws[k] = anc[draws[k]];
    L1TestInstance inst{tree.project(p, i).mass, level_proximity(i, h.l(), h.r(), cfg), delta};
    LevelOutcome out;
    out.level = i;
    out.proximity = inst.proximity;
    out.failure_prob = delta;
    out.samples_charged = draws.size();
    out.support = inst.known.size();
    if (cfg.median_repetitions == 1) {
      out.decision = l1_decide(inst, flavor, SampleBatch::from_draws(level_draws, inst.known.size()),
                               settings);
      out.verdict = out.decision->verdict;
    } else {
      auto base = [&](const SampleBatch& b) { return l1_decide(inst, flavor, b, settings).verdict; };
      out.verdict = amplify_median(base, cfg.median_repetitions)(level_draws, inst.known.size());
    }
    rep.per_level.push_back(std::move(out));
  }
  rep.verdict = std::all_of(rep.per_level.begin(), rep.per_level.end(),
                            [](const LevelOutcome& o) { return o.verdict == Verdict::accept; })
                    ? Verdict::accept
                    : Verdict::reject;
  return rep;
}

inline void check_inputs(const NetHierarchy& h, const TreeEmbedding& tree, const Distribution& p) {
  if (!p.space().same_as(h.space()) || !tree.space().same_as(h.space()))
    throw SpaceMismatch("hierarchy, tree and reference distribution must share one space");
  if (tree.l() != h.l() || tree.r() != h.r()) throw Error("tree was not built from this hierarchy");
}

}  // namespace detail

/// Worst-case tester: draws budget_worst samples once and runs the worst-case L1
/// sub-tester on the projections p~_i for every level i in [l, r-1].
template <SampleOracle Sampler>
TesterReport wit_worst(const NetHierarchy& h, const TreeEmbedding& tree, const Distribution& p,
                       Sampler& q_sampler, const WitConfig& cfg) {
  cfg.validate();
  detail::check_inputs(h, tree, p);
  const std::uint64_t m = budget_worst(h, cfg);
  const auto draws = draw_samples(q_sampler, m);
  return detail::run_levels(h, tree, p, draws, cfg, WitMode::worst, m);
}

/// Instance tester: budget from the truncated norms of the cluster distributions p_i,
/// instance-optimal sub-testers against the projections p~_i. Runs even when the
/// doubling estimate is infinite, recording a warning.
template <SampleOracle Sampler>
TesterReport wit_instance(const NetHierarchy& h, const TreeEmbedding& tree, const Distribution& p,
                          Sampler& q_sampler, const WitConfig& cfg) {
  cfg.validate();
  detail::check_inputs(h, tree, p);
  const auto doubling = doubling_constant(h, p);
  const std::uint64_t m = budget_instance(h, p, cfg);
  const auto draws = draw_samples(q_sampler, m);
  auto rep = detail::run_levels(h, tree, p, draws, cfg, WitMode::instance, m);
  rep.doubling_constant = doubling.constant;
  if (!doubling.finite())
    rep.warnings.push_back("doubling condition fails for p on the radius grid; no guarantee applies");
  return rep;
}

template <SampleOracle Sampler>
TesterReport wit_test(WitMode mode, const NetHierarchy& h, const TreeEmbedding& tree,
                      const Distribution& p, Sampler& q_sampler, const WitConfig& cfg) {
  return mode == WitMode::worst ? wit_worst(h, tree, p, q_sampler, cfg)
                                : wit_instance(h, tree, p, q_sampler, cfg);
}

}  // namespace netwit
