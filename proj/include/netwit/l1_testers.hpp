#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "netwit/error.hpp"
#include "netwit/random.hpp"

namespace netwit {

enum class Verdict { accept, reject };

inline std::string to_string(Verdict v) { return v == Verdict::accept ? "accept" : "reject"; }

// ---------------------------------------------------------------------------
// 2/3-quasinorm and truncation
// ---------------------------------------------------------------------------

/// (sum_j p_j^{2/3})^{3/2}. Zero entries contribute nothing.
inline double quasinorm_two_thirds(std::span<const double> p) {
  double acc = 0.0;
  for (double x : p)
    if (x > 0.0) acc += std::pow(x, 2.0 / 3.0);
  return std::pow(acc, 1.5);
}

/// Result of removing the largest entry, then `eps` mass from the smallest entries.
struct Truncation {
  std::vector<double> remaining;  // same length as the input; removed entries are 0
  std::size_t max_index = 0;
  double removed_max = 0.0;
  double removed_tail = 0.0;      // equals eps unless exhausted
  bool exhausted = false;         // eps reached or exceeded the mass left after the max
  std::vector<char> tail;         // 1 where an entry was removed in the second phase
};

/// p^{-max}_{-eps}: drop the single largest entry (lowest index on ties), then remove
/// entries in ascending order of mass (lowest index first on ties) until exactly `eps`
/// mass is gone, taking only part of the last entry.
inline Truncation truncate_minus_max_minus_eps(std::span<const double> p, double eps) {
  if (!(eps >= 0.0) || !(eps < 1.0)) throw Error("truncation mass must lie in [0, 1)");
  Truncation t;
  const std::size_t n = p.size();
  t.remaining.assign(p.begin(), p.end());
  t.tail.assign(n, 0);
  if (n == 0) {
    t.exhausted = eps > 0.0;
    return t;
  }
  for (std::size_t j = 1; j < n; ++j)
    if (p[j] > p[t.max_index]) t.max_index = j;
  t.removed_max = p[t.max_index];
  t.remaining[t.max_index] = 0.0;

  std::vector<std::size_t> order;
  order.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j)
    if (j != t.max_index) order.push_back(j);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  double left = eps;
  for (std::size_t j : order) {
    if (left <= 0.0) break;
    t.tail[j] = 1;
    if (p[j] <= left) {
      left -= p[j];
      t.removed_tail += p[j];
      t.remaining[j] = 0.0;
    } else {
      t.remaining[j] = p[j] - left;
      t.removed_tail += left;
      left = 0.0;
    }
  }
  t.exhausted = left > 0.0 || (eps > 0.0 && std::all_of(t.remaining.begin(), t.remaining.end(),
                                                        [](double v) { return v == 0.0; }));
  return t;
}

/// A block of equal masses: `multiplicity` entries each of mass `value`.
struct MassClass {
  double value;
  double multiplicity;
};

/// Truncated 2/3-quasinorm of a vector given as mass classes. Used where the vector
/// is too large to materialize (e.g. cluster masses of a fine lattice).
inline double truncated_quasinorm_classes(std::vector<MassClass> classes, double eps) {
  std::erase_if(classes, [](const MassClass& c) { return c.multiplicity <= 0.0; });
  if (classes.empty()) return 0.0;
  std::sort(classes.begin(), classes.end(),
            [](const MassClass& a, const MassClass& b) { return a.value < b.value; });
  classes.back().multiplicity -= 1.0;  // the single largest entry
  double acc = 0.0, left = eps;
  for (auto [v, m] : classes) {
    if (m <= 0.0 || v <= 0.0) continue;
    if (left > 0.0) {
      const double whole = std::min(m, std::floor(left / v));
      m -= whole;
      left -= whole * v;
      if (m > 0.0 && left > 0.0) {
        acc += std::pow(v - left, 2.0 / 3.0);
        m -= 1.0;
        left = 0.0;
      }
    }
    acc += m * std::pow(v, 2.0 / 3.0);
  }
  return std::pow(acc, 1.5);
}

// ---------------------------------------------------------------------------
// Instances, samples, budgets
// ---------------------------------------------------------------------------

struct L1TestInstance {
  std::vector<double> known;     // reference distribution over [m]
  double proximity = 0.5;        // eps_1 in (0, 2]
  double failure_prob = 1.0 / 3; // delta in (0, 1/2)

  void validate() const {
    if (!(proximity > 0.0 && proximity <= 2.0)) throw Error("L1 proximity must lie in (0, 2]");
    if (!(failure_prob > 0.0 && failure_prob < 0.5)) throw Error("failure probability must lie in (0, 1/2)");
    double s = 0.0;
    for (double x : known) {
      if (!(x >= 0.0)) throw InvalidDistribution("reference masses must be nonnegative");
      s += x;
    }
    if (known.empty() || std::abs(s - 1.0) > 1e-9) throw InvalidDistribution("reference must sum to 1");
  }
};

/// Histogram of draws over a support [m].
struct SampleBatch {
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  static SampleBatch from_draws(std::span<const std::size_t> draws, std::size_t support) {
    SampleBatch b{std::vector<std::uint64_t>(support, 0), 0};
    for (std::size_t x : draws) {
      if (x >= support) throw SizeMismatch("draw outside the support");
      ++b.counts[x];
    }
    b.total = draws.size();
    return b;
  }
};

/// ceil(c * sqrt(m) / eps1^2 * ln(1/delta))
inline std::uint64_t required_samples_worst(const L1TestInstance& inst, double c = 1.0) {
  const double m = static_cast<double>(inst.known.size());
  const double v = c * std::sqrt(m) / (inst.proximity * inst.proximity) * std::log(1.0 / inst.failure_prob);
  return static_cast<std::uint64_t>(std::ceil(v));
}

/// ceil(c * max{1/eps1, ||p^{-max}_{-eps1/16}||_{2/3} / eps1^2} * ln(1/delta))
inline std::uint64_t required_samples_instance(const L1TestInstance& inst, double c = 1.0) {
  const double e = inst.proximity;
  const double norm = quasinorm_two_thirds(truncate_minus_max_minus_eps(inst.known, e / 16.0).remaining);
  const double v = c * std::max(1.0 / e, norm / (e * e)) * std::log(1.0 / inst.failure_prob);
  return static_cast<std::uint64_t>(std::ceil(v));
}

// ---------------------------------------------------------------------------
// Statistic
// ---------------------------------------------------------------------------

enum class L1Flavor { worst_case, instance_optimal };

inline std::string to_string(L1Flavor f) {
  return f == L1Flavor::worst_case ? "worst" : "instance";
}

/// Which support elements feed the weighted chi-square part (`core`) and which are
/// pooled into the tail count. The instance flavor drops the heaviest element and the
/// light tail removed by truncation at eps1/16; the worst-case flavor keeps every
/// element with positive mass and pools only the zero-mass ones.
struct StatisticPartition {
  std::vector<std::size_t> core;
  std::vector<double> core_weight;  // p_j^{-2/3}
  std::vector<std::size_t> tail;
  double tail_mass = 0.0;
};

inline StatisticPartition partition_support(std::span<const double> p, L1Flavor flavor,
                                            double proximity) {
  StatisticPartition part;
  if (flavor == L1Flavor::worst_case) {
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (p[j] > 0.0) {
        part.core.push_back(j);
        part.core_weight.push_back(std::pow(p[j], -2.0 / 3.0));
      } else {
        part.tail.push_back(j);
      }
    }
    return part;
  }
  const Truncation t = truncate_minus_max_minus_eps(p, proximity / 16.0);
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (j == t.max_index) continue;
    if (t.remaining[j] > 0.0) {
      part.core.push_back(j);
      part.core_weight.push_back(std::pow(p[j], -2.0 / 3.0));
    } else {
      part.tail.push_back(j);
      part.tail_mass += p[j];
    }
  }
  return part;
}

struct StatisticValue {
  double chi = 0.0;            // sum_core ((X_j - s p_j)^2 - X_j) / p_j^{2/3}
  std::uint64_t tail = 0;      // samples landing in the tail
};

inline StatisticValue evaluate_statistic(std::span<const double> p, const StatisticPartition& part,
                                         std::span<const std::uint64_t> counts, std::uint64_t total) {
  StatisticValue v;
  const double s = static_cast<double>(total);
  for (std::size_t k = 0; k < part.core.size(); ++k) {
    const std::size_t j = part.core[k];
    const double x = static_cast<double>(counts[j]);
    const double dev = x - s * p[j];
    v.chi += (dev * dev - x) * part.core_weight[k];
  }
  for (std::size_t j : part.tail) v.tail += counts[j];
  return v;
}

// ---------------------------------------------------------------------------
// Null calibration
// ---------------------------------------------------------------------------

struct Thresholds {
  double chi = 0.0;
  double tail = 0.0;
};

/// Thread-safe cache of calibrated thresholds keyed by a content hash.
class CalibrationCache {
 public:
  std::optional<Thresholds> find(std::uint64_t key) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void insert(std::uint64_t key, Thresholds t) {
    std::unique_lock lock(mutex_);
    entries_.emplace(key, t);
  }

  template <class Fn>
  Thresholds get_or_compute(std::uint64_t key, Fn&& compute) {
    if (auto hit = find(key)) return *hit;
    Thresholds t = compute();  // deterministic in the key, so racing writers agree
    insert(key, t);
    return t;
  }

  void clear() {
    std::unique_lock lock(mutex_);
    entries_.clear();
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
  }

  std::map<std::uint64_t, Thresholds> snapshot() const {
    std::shared_lock lock(mutex_);
    return entries_;
  }

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::uint64_t, Thresholds> entries_;
};

inline CalibrationCache& default_calibration_cache() {
  static CalibrationCache cache;
  return cache;
}

struct L1Settings {
  double budget_constant = 1.0;
  std::size_t calibration_trials = 2000;
  CalibrationCache* cache = nullptr;  // nullptr -> process-wide default
};

namespace detail {

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < len; ++k) {
      h_ ^= b[k];
      h_ *= 0x100000001b3ULL;
    }
  }
  void f64(double x) {
    std::uint64_t u;
    std::memcpy(&u, &x, sizeof u);
    bytes(&u, sizeof u);
  }
  void u64(std::uint64_t x) { bytes(&x, sizeof x); }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::vector<double> canonical_order(std::span<const double> p) {
  std::vector<double> s(p.begin(), p.end());
  std::sort(s.begin(), s.end(), std::greater<>());
  return s;
}

/// Empirical (1 - a) quantile: the ceil((1 - a) T)-th smallest value.
inline double upper_quantile(std::vector<double> v, double a) {
  std::sort(v.begin(), v.end());
  const double pos = std::ceil((1.0 - a) * static_cast<double>(v.size()));
  const std::size_t k = static_cast<std::size_t>(std::clamp(pos, 1.0, static_cast<double>(v.size())));
  return v[k - 1];
}

}  // namespace detail

/// Content hash of (sorted p, proximity, delta, flavor, sample size, trials). Sorting
/// makes the key, and hence the thresholds, invariant under relabeling of the support.
inline std::uint64_t calibration_key(std::span<const double> p, double proximity, double delta,
                                     L1Flavor flavor, std::uint64_t samples, std::size_t trials) {
  detail::Fnv1a h;
  for (double x : detail::canonical_order(p)) h.f64(x);
  h.u64(p.size());
  h.f64(proximity);
  h.f64(delta);
  h.u64(flavor == L1Flavor::worst_case ? 1 : 2);
  h.u64(samples);
  h.u64(trials);
  return h.value();
}

/// Monte-Carlo thresholds under the null q = p. The failure budget is split evenly
/// between the chi-square part and the tail count when both are present.
inline Thresholds calibrate_thresholds(std::span<const double> p, double proximity, double delta,
                                       L1Flavor flavor, std::uint64_t samples, std::size_t trials) {
  const std::uint64_t key = calibration_key(p, proximity, delta, flavor, samples, trials);
  const auto sorted = detail::canonical_order(p);
  const auto part = partition_support(sorted, flavor, proximity);
  const bool has_core = !part.core.empty(), has_tail = !part.tail.empty();
  const double a_chi = has_tail ? delta / 2.0 : delta;
  const double a_tail = has_core ? delta / 2.0 : delta;

  VectorSampler sampler(sorted, derive_seed(key, 0xca1b, 0));
  std::vector<double> chi(trials), tail(trials);
  std::vector<std::uint64_t> counts(sorted.size());
  for (std::size_t t = 0; t < trials; ++t) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::uint64_t k = 0; k < samples; ++k) ++counts[sampler.draw()];
    const auto v = evaluate_statistic(sorted, part, counts, samples);
    chi[t] = v.chi;
    tail[t] = static_cast<double>(v.tail);
  }
  Thresholds th;
  th.chi = has_core && trials > 0 ? detail::upper_quantile(chi, a_chi) : 0.0;
  th.tail = has_tail && trials > 0 ? detail::upper_quantile(tail, a_tail) : 0.0;
  return th;
}

struct L1Decision {
  Verdict verdict = Verdict::accept;
  StatisticValue statistic;
  Thresholds thresholds;
};

/// Runs the calibrated statistic on a batch without a budget check.
inline L1Decision l1_decide(const L1TestInstance& inst, L1Flavor flavor, const SampleBatch& samples,
                            const L1Settings& settings = {}) {
  if (samples.counts.size() != inst.known.size())
    throw SizeMismatch("sample histogram and reference have different supports");
  CalibrationCache& cache = settings.cache ? *settings.cache : default_calibration_cache();
  const std::uint64_t key = calibration_key(inst.known, inst.proximity, inst.failure_prob, flavor,
                                            samples.total, settings.calibration_trials);
  const Thresholds th = cache.get_or_compute(key, [&] {
    return calibrate_thresholds(inst.known, inst.proximity, inst.failure_prob, flavor,
                                samples.total, settings.calibration_trials);
  });
  const auto part = partition_support(inst.known, flavor, inst.proximity);
  L1Decision d;
  d.thresholds = th;
  d.statistic = evaluate_statistic(inst.known, part, samples.counts, samples.total);
  const bool reject = d.statistic.chi > th.chi || static_cast<double>(d.statistic.tail) > th.tail;
  d.verdict = reject ? Verdict::reject : Verdict::accept;
  return d;
}

/// Worst-case L1 identity tester: needs ceil(c sqrt(m)/eps1^2 ln(1/delta)) samples.
inline Verdict worst_case_l1_test(const L1TestInstance& inst, const SampleBatch& samples,
                                  const L1Settings& settings = {}) {
  inst.validate();
  const auto need = required_samples_worst(inst, settings.budget_constant);
  if (samples.total < need)
    throw InsufficientSamples("worst-case L1 test needs " + std::to_string(need) + " samples, got " +
                              std::to_string(samples.total));
  return l1_decide(inst, L1Flavor::worst_case, samples, settings).verdict;
}

/// Instance-optimal L1 identity tester with the truncated 2/3-norm budget.
inline Verdict instance_optimal_l1_test(const L1TestInstance& inst, const SampleBatch& samples,
                                        const L1Settings& settings = {}) {
  inst.validate();
  const auto need = required_samples_instance(inst, settings.budget_constant);
  if (samples.total < need)
    throw InsufficientSamples("instance L1 test needs " + std::to_string(need) + " samples, got " +
                              std::to_string(samples.total));
  return l1_decide(inst, L1Flavor::instance_optimal, samples, settings).verdict;
}

// ---------------------------------------------------------------------------
// Median amplification
// ---------------------------------------------------------------------------

/// Majority vote of `k` runs of `base` on disjoint contiguous slices of the draws.
/// `base` maps a SampleBatch to a Verdict.
template <class Base>
class MedianTester {
 public:
  MedianTester(Base base, std::size_t k) : base_(std::move(base)), k_(k) {
    if (k_ == 0 || k_ % 2 == 0) throw Error("median amplification needs an odd repetition count");
  }

  std::size_t repetitions() const noexcept { return k_; }

  /// Samples per slice for a given number of draws.
  std::size_t slice_size(std::size_t draws) const noexcept { return draws / k_; }

  Verdict operator()(std::span<const std::size_t> draws, std::size_t support) const {
    const std::size_t len = slice_size(draws.size());
    std::size_t rejects = 0;
    for (std::size_t r = 0; r < k_; ++r) {
      const auto batch = SampleBatch::from_draws(draws.subspan(r * len, len), support);
      if (base_(batch) == Verdict::reject) ++rejects;
    }
    return 2 * rejects > k_ ? Verdict::reject : Verdict::accept;
  }

 private:
  Base base_;
  std::size_t k_;
};

template <class Base>
MedianTester<Base> amplify_median(Base base, std::size_t k) {
  return MedianTester<Base>(std::move(base), k);
}

}  // namespace netwit
