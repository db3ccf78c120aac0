#pragma once

// Experiment orchestration: configs, Monte-Carlo trials, scaling sweeps, calibration.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "netwit/error.hpp"
#include "netwit/generators.hpp"
#include "netwit/io.hpp"
#include "netwit/l1_testers.hpp"
#include "netwit/metric_space.hpp"
#include "netwit/nets.hpp"
#include "netwit/random.hpp"
#include "netwit/transport.hpp"
#include "netwit/tree.hpp"
#include "netwit/wit.hpp"

namespace netwit {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Statistics helpers
// ---------------------------------------------------------------------------

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Wilson score interval for `successes` out of `n` at the given normal quantile
/// (1.96 for 95%).
inline Interval wilson_interval(std::size_t successes, std::size_t n, double z = 1.959963984540054) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (phat + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
  // The interval touches 0 (or 1) exactly when no (or every) trial succeeded.
  return {successes == 0 ? 0.0 : std::max(0.0, centre - half),
          successes == n ? 1.0 : std::min(1.0, centre + half)};
}

/// Ordinary least-squares slope of y against x.
inline double least_squares_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw SizeMismatch("slope fit needs matching series of length >= 2");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  if (sxx == 0.0) throw Error("slope fit needs at least two distinct x values");
  return sxy / sxx;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

enum class QLabel { null_hypothesis, far, unlabeled };

inline std::string to_string(QLabel l) {
  switch (l) {
    case QLabel::null_hypothesis: return "null";
    case QLabel::far: return "far";
    default: return "unlabeled";
  }
}

/// Structured experiment description (JSON). Sources are small objects with a `kind`:
///   space: grid{dim,h,metric} | line{n,step} | random-points{n,dim,metric,seed}
///          | random-graph{n,seed} | matrix{path} | points{path} | file{path}
///   p:     uniform | point-mass{at} | near-point-mass{at,heavy} | random{seed} | file{path}
///   q:     equal-to-p | far-instance{slack} | any p source, with optional
///          label "null"|"far" and certificate{wasserstein}
struct ExperimentConfig {
  json space = {{"kind", "grid"}, {"dim", 2}, {"h", 0.125}, {"metric", "linf"}};
  json hierarchy = {{"kind", "greedy"}};
  json p = {{"kind", "uniform"}};
  json q = {{"kind", "equal-to-p"}};
  double epsilon = 0.2;
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  WitMode mode = WitMode::worst;
  std::string output;
  WitConfig tester;
  unsigned threads = 0;  // 0 -> hardware concurrency

  void validate() const {
    if (trials < 1) throw Error("trials must be at least 1");
    if (!(epsilon > 0.0)) throw EpsilonOutOfRange("epsilon must be positive");
  }

  json to_json() const {
    return {{"schema", "netwit.experiment"},
            {"version", io::kSchemaVersion},
            {"space", space},
            {"hierarchy", hierarchy},
            {"p", p},
            {"q", q},
            {"epsilon", epsilon},
            {"trials", trials},
            {"seed", seed},
            {"mode", to_string(mode)},
            {"output", output},
            {"tester",
             {{"budget_constant", tester.budget_constant},
              {"level_proximity_constant", tester.level_proximity_constant},
              {"delta_total", tester.delta_total},
              {"median_repetitions", tester.median_repetitions},
              {"calibration_trials", tester.calibration_trials}}},
            {"threads", threads}};
  }

  static ExperimentConfig from_json(const json& doc) {
    if (doc.contains("version") && doc.at("version").get<int>() > io::kSchemaVersion)
      throw FormatError("experiment schema version " + doc.at("version").dump() + " is newer than supported");
    ExperimentConfig c;
    if (doc.contains("space")) c.space = doc.at("space");
    if (doc.contains("hierarchy")) c.hierarchy = doc.at("hierarchy");
    if (doc.contains("p")) c.p = doc.at("p");
    if (doc.contains("q")) c.q = doc.at("q");
    c.epsilon = doc.value("epsilon", c.epsilon);
    const long long trials = doc.value("trials", 1LL);
    if (trials < 1) throw Error("trials must be at least 1");
    c.trials = static_cast<std::size_t>(trials);
    c.seed = doc.value("seed", c.seed);
    if (doc.contains("mode")) c.mode = parse_wit_mode(doc.at("mode").get<std::string>());
    c.output = doc.value("output", std::string{});
    c.threads = doc.value("threads", 0u);
    if (doc.contains("tester")) {
      const auto& t = doc.at("tester");
      c.tester.budget_constant = t.value("budget_constant", c.tester.budget_constant);
      c.tester.level_proximity_constant = t.value("level_proximity_constant", c.tester.level_proximity_constant);
      c.tester.delta_total = t.value("delta_total", c.tester.delta_total);
      c.tester.median_repetitions = t.value("median_repetitions", c.tester.median_repetitions);
      c.tester.calibration_trials = t.value("calibration_trials", c.tester.calibration_trials);
    }
    c.validate();
    return c;
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config '" + path + "'");
    try {
      return from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw FormatError(std::string("config '") + path + "': " + e.what());
    }
  }
};

namespace detail {

inline std::string kind_of(const json& src) {
  if (!src.is_object() || !src.contains("kind")) throw FormatError("source needs a 'kind': " + src.dump());
  return src.at("kind").get<std::string>();
}

inline PointMetric metric_of(const json& src) {
  return parse_point_metric(src.value("metric", std::string("euclidean")));
}

}  // namespace detail

/// Space plus, for grid sources, the grid description (lattice nets need it).
struct SpaceSource {
  FiniteMetricSpace space;
  std::optional<GridSpace> grid;
};

inline SpaceSource make_space(const json& src) {
  const std::string kind = detail::kind_of(src);
  if (kind == "grid") {
    auto g = make_grid(src.value("dim", std::size_t{2}), src.value("h", 0.125),
                       parse_point_metric(src.value("metric", std::string("linf"))));
    return {g.space, g};
  }
  if (kind == "line") return {line_space(src.at("n").get<std::size_t>(), src.value("step", 1.0)), {}};
  if (kind == "random-points")
    return {random_point_space(src.at("n").get<std::size_t>(), src.value("dim", std::size_t{2}),
                               detail::metric_of(src), src.value("seed", std::uint64_t{1})),
            {}};
  if (kind == "random-graph")
    return {random_graph_metric(src.at("n").get<std::size_t>(), src.value("seed", std::uint64_t{1})), {}};
  if (kind == "matrix") return {io::read_matrix_csv(src.at("path").get<std::string>()), {}};
  if (kind == "points") return {io::read_points(src.at("path").get<std::string>()), {}};
  if (kind == "file") return {io::read_space(src.at("path").get<std::string>()), {}};
  throw FormatError("unknown space kind '" + kind + "'");
}

inline Distribution make_distribution(const json& src, const FiniteMetricSpace& space) {
  const std::string kind = detail::kind_of(src);
  if (kind == "uniform") return Distribution::uniform(space);
  if (kind == "point-mass") return Distribution::point_mass(space, src.value("at", std::size_t{0}));
  if (kind == "near-point-mass")
    return near_point_mass(space, src.value("at", std::size_t{0}), src.value("heavy", 0.9));
  if (kind == "random") {
    Rng rng(src.value("seed", std::uint64_t{1}));
    return random_distribution(space, rng);
  }
  if (kind == "file") return io::read_distribution(src.at("path").get<std::string>(), space);
  throw FormatError("unknown distribution kind '" + kind + "'");
}

inline NetHierarchy make_hierarchy(const json& src, const SpaceSource& s, double epsilon) {
  const std::string kind = src.is_null() ? "greedy" : detail::kind_of(src);
  if (kind == "greedy") {
    std::optional<std::uint64_t> shuffle;
    if (src.contains("shuffle_seed")) shuffle = src.at("shuffle_seed").get<std::uint64_t>();
    return build_hierarchy(s.space, epsilon, shuffle);
  }
  if (kind == "lattice") {
    if (!s.grid) throw ResolutionIncompatible("lattice hierarchies need a grid space");
    return trivial_grid_hierarchy(*s.grid, epsilon);
  }
  if (kind == "file") {
    std::ifstream in(src.at("path").get<std::string>());
    if (!in) throw FormatError("cannot open hierarchy file");
    return io::hierarchy_from_json(json::parse(in), s.space);
  }
  throw FormatError("unknown hierarchy kind '" + kind + "'");
}

/// Everything a run needs, built once from a config.
struct Experiment {
  ExperimentConfig config;
  SpaceSource source;
  NetHierarchy hierarchy;
  TreeEmbedding tree;
  Distribution p;
  Distribution q;
  QLabel label = QLabel::unlabeled;
  std::optional<double> certified_wasserstein;  // exact W_d(p, q) backing a "far" label
};

/// Resolves the q source and its label. A "far" label is only ever attached together
/// with an exact Wasserstein certificate recomputed here.
inline std::pair<Distribution, QLabel> make_q(const json& src, const Distribution& p, double epsilon,
                                              std::optional<double>& certificate) {
  const std::string kind = detail::kind_of(src);
  if (kind == "equal-to-p") return {p, QLabel::null_hypothesis};
  if (kind == "far-instance") {
    auto inst = far_instance(p, epsilon, src.value("slack", 1.05));
    certificate = inst.wasserstein;
    return {inst.q, QLabel::far};
  }
  Distribution q = make_distribution(src, p.space());
  const std::string label = src.value("label", std::string{});
  if (label == "far") {
    if (!src.contains("certificate"))
      throw UncertifiedInstance("q is labelled far but the config stores no Wasserstein certificate");
    const double stored = src.at("certificate").at("wasserstein").get<double>();
    auto inst = certify_far(p, q, epsilon);
    if (std::abs(inst.wasserstein - stored) > 1e-9 * std::max(1.0, stored))
      throw UncertifiedInstance("stored certificate " + std::to_string(stored) +
                                " disagrees with the exact distance " + std::to_string(inst.wasserstein));
    certificate = inst.wasserstein;
    return {q, QLabel::far};
  }
  if (label == "null") {
    if (l1_distance(p, q) > 1e-12) throw Error("q is labelled null but differs from p");
    return {q, QLabel::null_hypothesis};
  }
  if (!label.empty()) throw FormatError("unknown q label '" + label + "'");
  return {q, QLabel::unlabeled};
}

inline Experiment prepare_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  auto source = make_space(cfg.space);
  auto h = make_hierarchy(cfg.hierarchy, source, cfg.epsilon);
  TreeEmbedding tree(h);
  auto p = make_distribution(cfg.p, source.space);
  std::optional<double> cert;
  auto [q, label] = make_q(cfg.q, p, cfg.epsilon, cert);
  return {cfg, std::move(source), std::move(h), std::move(tree), std::move(p), std::move(q), label, cert};
}

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

struct TrialSummary {
  QLabel label = QLabel::unlabeled;
  std::size_t trials = 0;
  std::size_t accepts = 0;
  double accept_rate = 0.0;
  Interval accept_ci;
  double reject_rate = 0.0;
  Interval reject_ci;
  std::optional<double> certified_wasserstein;
  std::vector<TesterReport> reports;  // sorted by trial index

  /// Rate of the verdict the label calls for (accept for null, reject for far).
  std::optional<Interval> success_ci() const {
    if (label == QLabel::null_hypothesis) return accept_ci;
    if (label == QLabel::far) return reject_ci;
    return std::nullopt;
  }
};

inline std::uint64_t trial_seed(std::uint64_t master, std::size_t k) { return derive_seed(master, 0, k); }

/// Runs `trials` independent end-to-end tests. Trial k samples q with
/// derive_seed(seed, 0, k); trials run in parallel, aggregation is in index order, so
/// the summary depends only on the config.
inline TrialSummary run_trials(const Experiment& ex, CalibrationCache* cache = nullptr) {
  const auto& cfg = ex.config;
  WitConfig tcfg = cfg.tester;
  tcfg.epsilon = cfg.epsilon;
  tcfg.cache = cache ? cache : tcfg.cache;
  tcfg.validate();

  std::vector<std::optional<TesterReport>> slots(cfg.trials);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= cfg.trials) return;
      try {
        const std::uint64_t s = trial_seed(cfg.seed, k);
        VectorSampler sampler(ex.q, s);
        auto rep = wit_test(cfg.mode, ex.hierarchy, ex.tree, ex.p, sampler, tcfg);
        rep.seed = s;
        slots[k] = std::move(rep);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = cfg.trials;
      }
    }
  };
  unsigned nthreads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  nthreads = static_cast<unsigned>(std::min<std::size_t>(nthreads, cfg.trials));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  TrialSummary sum;
  sum.label = ex.label;
  sum.trials = cfg.trials;
  sum.certified_wasserstein = ex.certified_wasserstein;
  for (auto& r : slots) {
    if (r->verdict == Verdict::accept) ++sum.accepts;
    sum.reports.push_back(std::move(*r));
  }
  sum.accept_rate = static_cast<double>(sum.accepts) / static_cast<double>(sum.trials);
  sum.reject_rate = 1.0 - sum.accept_rate;
  sum.accept_ci = wilson_interval(sum.accepts, sum.trials);
  sum.reject_ci = wilson_interval(sum.trials - sum.accepts, sum.trials);
  return sum;
}

inline TrialSummary run_trials(const ExperimentConfig& cfg, CalibrationCache* cache = nullptr) {
  return run_trials(prepare_experiment(cfg), cache);
}

/// One structured document per run. With a single trial the report is passed through
/// unchanged under "report".
inline json summary_to_json(const TrialSummary& s, const ExperimentConfig& cfg, bool include_reports = true) {
  json doc;
  doc["schema"] = "netwit.trials";
  doc["version"] = io::kSchemaVersion;
  doc["config"] = cfg.to_json();
  doc["label"] = to_string(s.label);
  doc["trials"] = s.trials;
  doc["accepts"] = s.accepts;
  doc["accept_rate"] = s.accept_rate;
  doc["accept_ci95"] = {s.accept_ci.lo, s.accept_ci.hi};
  doc["reject_rate"] = s.reject_rate;
  doc["reject_ci95"] = {s.reject_ci.lo, s.reject_ci.hi};
  if (s.certified_wasserstein) doc["certificate"] = {{"wasserstein", *s.certified_wasserstein}};
  if (!s.reports.empty()) doc["samples_per_trial"] = s.reports.front().total_samples;
  if (s.trials == 1) {
    doc["report"] = io::report_to_json(s.reports.front());
  } else if (include_reports) {
    json reps = json::array();
    for (const auto& r : s.reports) reps.push_back(io::report_to_json(r));
    doc["reports"] = std::move(reps);
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Scaling sweep
// ---------------------------------------------------------------------------

/// Budgets on the unit cube [0,1]^d (diameter 1 under linf) with lattice nets and the
/// continuous uniform reference law; `core_*` is the budget with the constant and the
/// polylog factor stripped, which carries the epsilon exponent.
struct ScalingRow {
  std::size_t dim = 0;
  double epsilon = 0.0;
  int l = 0, r = 0;
  std::uint64_t budget_worst = 0;
  std::uint64_t budget_instance = 0;
  double core_worst = 0.0;
  double core_instance = 0.0;
};

struct ScalingFit {
  std::size_t dim = 0;
  double target = 0.0;  // -max{2, d/2}
  double slope_worst = 0.0;
  double slope_instance = 0.0;
};

struct ScalingResult {
  std::vector<ScalingRow> rows;
  std::vector<ScalingFit> fits;

  void write_csv(std::ostream& out) const {
    out << std::setprecision(10);
    out << "dim,epsilon,l,r,budget_worst,budget_instance,core_worst,core_instance,slope_worst,slope_instance,target\n";
    for (const auto& row : rows) {
      const auto fit = std::find_if(fits.begin(), fits.end(), [&](const ScalingFit& f) { return f.dim == row.dim; });
      out << row.dim << "," << row.epsilon << "," << row.l << "," << row.r << "," << row.budget_worst << ","
          << row.budget_instance << "," << row.core_worst << "," << row.core_instance << ","
          << fit->slope_worst << "," << fit->slope_instance << "," << fit->target << "\n";
    }
  }
};

inline ScalingRow scaling_row(std::size_t d, double epsilon, const WitConfig& base = {}) {
  WitConfig cfg = base;
  cfg.epsilon = epsilon;
  const double diameter = 1.0;
  const auto [l, r] = lattice_level_range(epsilon);
  std::vector<LevelProfile> prof;
  for (int i = l; i <= r; ++i) {
    const double cut = std::min(pow2(-i - 4) * epsilon, std::nextafter(1.0, 0.0));
    prof.push_back({i, lattice_net_size(d, i),
                    truncated_quasinorm_classes(uniform_cube_cluster_classes(d, i), cut)});
  }
  ScalingRow row;
  row.dim = d;
  row.epsilon = epsilon;
  row.l = l;
  row.r = r;
  row.core_worst = budget_worst_core(prof, epsilon);
  row.core_instance = budget_instance_core(prof, epsilon);
  row.budget_worst = budget_from_core(row.core_worst, diameter, cfg);
  row.budget_instance = budget_from_core(row.core_instance, diameter, cfg);
  return row;
}

/// Deterministic formula evaluation over dims x eps_grid with least-squares log-log
/// slopes (log2 core against log2 epsilon). Needs at least four epsilon values.
inline ScalingResult bench_scaling(std::span<const std::size_t> dims, std::span<const double> eps_grid,
                                   const WitConfig& base = {}) {
  if (eps_grid.size() < 4) throw Error("scaling fit needs at least 4 epsilon values");
  for (double e : eps_grid)
    if (!(e > 0.0 && e < 8.0)) throw EpsilonOutOfRange("sweep epsilon must lie in (0, 8)");
  ScalingResult res;
  for (std::size_t d : dims) {
    if (d == 0) throw ResolutionIncompatible("dimension must be at least 1");
    std::vector<double> x, yw, yi;
    for (double e : eps_grid) {
      res.rows.push_back(scaling_row(d, e, base));
      x.push_back(std::log2(e));
      yw.push_back(std::log2(res.rows.back().core_worst));
      yi.push_back(std::log2(res.rows.back().core_instance));
    }
    res.fits.push_back({d, -std::max(2.0, static_cast<double>(d) / 2.0), least_squares_slope(x, yw),
                        least_squares_slope(x, yi)});
  }
  return res;
}

// ---------------------------------------------------------------------------
// Constant calibration sweep
// ---------------------------------------------------------------------------

struct CalibrationRow {
  double budget_constant = 0.0;
  WitMode mode = WitMode::worst;
  std::uint64_t samples = 0;
  double null_accept_rate = 0.0;
  Interval null_accept_ci;
  double far_reject_rate = 0.0;
  Interval far_reject_ci;
};

/// For each budget constant c, runs the null (q = p) and far (certified far-instance)
/// experiments derived from `base` and reports both success rates.
inline std::vector<CalibrationRow> calibrate_sweep(const ExperimentConfig& base, std::span<const double> constants,
                                                   CalibrationCache* cache = nullptr) {
  std::vector<CalibrationRow> out;
  ExperimentConfig null_cfg = base;
  null_cfg.q = {{"kind", "equal-to-p"}};
  ExperimentConfig far_cfg = base;
  far_cfg.q = {{"kind", "far-instance"}};
  auto null_ex = prepare_experiment(null_cfg);
  auto far_ex = prepare_experiment(far_cfg);
  for (double c : constants) {
    null_ex.config.tester.budget_constant = c;
    far_ex.config.tester.budget_constant = c;
    far_ex.config.seed = derive_seed(base.seed, 1, 0);
    const auto n = run_trials(null_ex, cache);
    const auto f = run_trials(far_ex, cache);
    out.push_back({c, base.mode, n.reports.front().total_samples, n.accept_rate, n.accept_ci, f.reject_rate,
                   f.reject_ci});
  }
  return out;
}

inline void write_calibration_csv(std::ostream& out, std::span<const CalibrationRow> rows) {
  out << std::setprecision(10);
  out << "budget_constant,mode,samples,null_accept_rate,null_accept_ci_lo,null_accept_ci_hi,"
         "far_reject_rate,far_reject_ci_lo,far_reject_ci_hi\n";
  for (const auto& r : rows)
    out << r.budget_constant << "," << to_string(r.mode) << "," << r.samples << "," << r.null_accept_rate << ","
        << r.null_accept_ci.lo << "," << r.null_accept_ci.hi << "," << r.far_reject_rate << ","
        << r.far_reject_ci.lo << "," << r.far_reject_ci.hi << "\n";
}

}  // namespace netwit
