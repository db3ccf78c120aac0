// Command-line front end.
//
// Exit codes: 0 accept / success, 1 reject, 2 usage error, 3 internal error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "netwit/netwit.hpp"

namespace {

using namespace netwit;
using json = nlohmann::json;

constexpr int kExitAccept = 0;
constexpr int kExitReject = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInternal = 3;

/// Bad flag combinations discovered after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 1;
  std::string config;
  std::string out;
  bool recalibrate = false;
  std::string calibration_cache;
};

/// Writes `text` to the --out path, or stdout when none is given.
void emit(const Globals& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(g.out);
  if (!f) throw FormatError("cannot write '" + g.out + "'");
  f << text;
}

/// Loads (unless --recalibrate) and later saves the persisted calibration cache.
class CacheSession {
 public:
  explicit CacheSession(const Globals& g) : path_(g.calibration_cache) {
    if (!path_.empty() && !g.recalibrate) io::load_calibration_cache(cache_, path_);
  }
  ~CacheSession() {
    if (path_.empty()) return;
    try {
      io::save_calibration_cache(cache_, path_);
    } catch (const std::exception& e) {
      std::cerr << "warning: " << e.what() << "\n";
    }
  }
  CalibrationCache* get() { return &cache_; }

 private:
  std::string path_;
  CalibrationCache cache_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// gen-space
// ---------------------------------------------------------------------------

struct GenSpaceOpts {
  std::string kind = "grid";
  std::size_t dim = 2;
  double h = 0.125;
  std::string metric = "linf";
  std::size_t n = 16;
  double step = 1.0;
  bool matrix = false;
  std::string dist;
  std::string dist_out;
  std::size_t at = 0;
  double heavy = 0.9;
};

int run_gen_space(const Globals& g, const GenSpaceOpts& o) {
  json src{{"kind", o.kind}, {"dim", o.dim}, {"h", o.h}, {"metric", o.metric},
           {"n", o.n},       {"step", o.step}, {"seed", g.seed}};
  const auto s = make_space(src).space;
  std::ostringstream text;
  if (s.has_points() && !o.matrix)
    io::write_points(text, s);
  else
    io::write_matrix_csv(text, s);
  emit(g, text.str());
  if (!o.dist.empty()) {
    if (o.dist_out.empty()) throw UsageError("--dist needs --dist-out");
    const auto p = make_distribution({{"kind", o.dist}, {"at", o.at}, {"heavy", o.heavy}, {"seed", g.seed}}, s);
    std::ofstream f(o.dist_out);
    if (!f) throw FormatError("cannot write '" + o.dist_out + "'");
    f.precision(17);
    io::write_masses(f, p.mass());
  }
  return kExitAccept;
}

// ---------------------------------------------------------------------------
// net-build / embed
// ---------------------------------------------------------------------------

struct NetOpts {
  std::string space;
  double epsilon = 0.2;
  std::optional<std::uint64_t> shuffle_seed;
};

int run_net_build(const Globals& g, const NetOpts& o) {
  const auto s = io::read_space(o.space);
  const auto h = build_hierarchy(s, o.epsilon, o.shuffle_seed);
  emit(g, io::hierarchy_to_json(h).dump(2) + "\n");
  std::cerr << "levels " << h.l() << ".." << h.r() << ", net sizes:";
  for (const auto& lvl : h.levels()) std::cerr << " " << lvl.size();
  std::cerr << "\n";
  return kExitAccept;
}

int run_embed(const Globals& g, const NetOpts& o) {
  const auto s = io::read_space(o.space);
  const auto t = embed(build_hierarchy(s, o.epsilon, o.shuffle_seed));
  emit(g, t.to_text());
  return kExitAccept;
}

// ---------------------------------------------------------------------------
// wasserstein
// ---------------------------------------------------------------------------

struct WassersteinOpts {
  std::string space, p, q;
};

int run_wasserstein(const Globals& g, const WassersteinOpts& o) {
  const auto s = io::read_space(o.space);
  const auto p = io::read_distribution(o.p, s);
  const auto q = io::read_distribution(o.q, s);
  const auto plan = wasserstein_exact(p, q);
  const auto cert = verify_certificate(p, q, plan);
  if (!cert.valid) throw Error("transport certificate failed: " + cert.message);
  std::cout << "cost=" << fmt(plan.cost) << "\n";
  std::ostringstream text;
  text.precision(17);
  io::write_plan_csv(text, plan);
  if (g.out.empty()) {
    std::cout << text.str();
  } else {
    emit(g, text.str());
  }
  return kExitAccept;
}

// ---------------------------------------------------------------------------
// test
// ---------------------------------------------------------------------------

struct TestOpts {
  std::string mode;
  std::optional<double> epsilon;
  std::optional<std::size_t> trials;
  std::string space, p, q, q_label, hierarchy;
  std::optional<double> certificate;
  std::optional<double> budget_constant;
  std::optional<unsigned> threads;
  bool full = false;
};

ExperimentConfig assemble_config(const Globals& g, const TestOpts& o, const CLI::App& app) {
  ExperimentConfig c = g.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(g.config);
  if (app.count("--seed") || g.config.empty()) c.seed = g.seed;
  if (!o.mode.empty()) c.mode = parse_wit_mode(o.mode);
  if (o.epsilon) c.epsilon = *o.epsilon;
  if (o.trials) c.trials = *o.trials;
  if (o.threads) c.threads = *o.threads;
  if (o.budget_constant) c.tester.budget_constant = *o.budget_constant;
  if (!o.space.empty()) c.space = {{"kind", "file"}, {"path", o.space}};
  if (!o.hierarchy.empty()) c.hierarchy = {{"kind", o.hierarchy}};
  if (!o.p.empty()) c.p = {{"kind", "file"}, {"path", o.p}};
  if (!o.q.empty()) {
    if (o.q == "equal-to-p" || o.q == "far-instance")
      c.q = {{"kind", o.q}};
    else
      c.q = {{"kind", "file"}, {"path", o.q}};
  }
  if (!o.q_label.empty()) c.q["label"] = o.q_label;
  if (o.certificate) c.q["certificate"] = {{"wasserstein", *o.certificate}};
  c.validate();
  return c;
}

int run_test(const Globals& g, const TestOpts& o, const CLI::App& app) {
  const auto cfg = assemble_config(g, o, app);
  CacheSession cache(g);
  const auto summary = run_trials(cfg, cache.get());
  Globals out = g;
  if (out.out.empty()) out.out = cfg.output;
  emit(out, summary_to_json(summary, cfg, o.full).dump(2) + "\n");
  std::cerr << "mode=" << to_string(cfg.mode) << " label=" << to_string(summary.label)
            << " trials=" << summary.trials << " accept_rate=" << summary.accept_rate
            << " ci95=[" << summary.accept_ci.lo << "," << summary.accept_ci.hi << "]"
            << " samples=" << summary.reports.front().total_samples << "\n";
  // A single run reports its verdict; several runs report the majority verdict.
  return 2 * summary.accepts > summary.trials ? kExitAccept : kExitReject;
}

// ---------------------------------------------------------------------------
// bench-scaling / calibrate
// ---------------------------------------------------------------------------

struct BenchOpts {
  std::vector<std::size_t> dims{2, 4, 6};
  std::vector<double> eps{0.125, 0.0625, 0.03125, 0.015625, 0.0078125};
  double budget_constant = 1.0;
};

int run_bench(const Globals& g, const BenchOpts& o) {
  WitConfig base;
  base.budget_constant = o.budget_constant;
  const auto res = bench_scaling(o.dims, o.eps, base);
  std::ostringstream text;
  res.write_csv(text);
  emit(g, text.str());
  for (const auto& f : res.fits)
    std::cerr << "d=" << f.dim << " slope_worst=" << f.slope_worst << " slope_instance=" << f.slope_instance
              << " target=" << f.target << "\n";
  return kExitAccept;
}

struct CalibrateOpts {
  std::vector<double> constants{0.25, 0.5, 1.0, 2.0};
  std::size_t trials = 300;
  std::string mode;
  std::optional<double> epsilon;
};

int run_calibrate(const Globals& g, const CalibrateOpts& o, const CLI::App& app) {
  ExperimentConfig c = g.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(g.config);
  if (app.count("--seed") || g.config.empty()) c.seed = g.seed;
  c.trials = o.trials;
  if (!o.mode.empty()) c.mode = parse_wit_mode(o.mode);
  if (o.epsilon) c.epsilon = *o.epsilon;
  c.validate();
  CacheSession cache(g);
  const auto rows = calibrate_sweep(c, o.constants, cache.get());
  std::ostringstream text;
  write_calibration_csv(text, rows);
  emit(g, text.str());
  return kExitAccept;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein identity testing on finite metric spaces"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "master seed")->capture_default_str();
  app.add_option("--config", g.config, "experiment config (JSON)");
  app.add_option("--out", g.out, "output path (default: stdout)");
  app.add_flag("--recalibrate", g.recalibrate, "ignore the persisted calibration cache");
  app.add_option("--calibration-cache", g.calibration_cache, "calibration cache file (JSON)");

  GenSpaceOpts gen;
  auto* gen_cmd = app.add_subcommand("gen-space", "generate a space (and optionally a distribution)");
  gen_cmd->add_option("--kind", gen.kind, "grid|line|random-points|random-graph")
      ->check(CLI::IsMember({"grid", "line", "random-points", "random-graph"}))
      ->capture_default_str();
  gen_cmd->add_option("--dim", gen.dim, "dimension")->capture_default_str();
  gen_cmd->add_option("--resolution", gen.h, "grid resolution")->capture_default_str();
  gen_cmd->add_option("--metric", gen.metric, "euclidean|linf")
      ->check(CLI::IsMember({"euclidean", "linf"}))
      ->capture_default_str();
  gen_cmd->add_option("--n", gen.n, "point count (line, random kinds)")->capture_default_str();
  gen_cmd->add_option("--step", gen.step, "line spacing")->capture_default_str();
  gen_cmd->add_flag("--matrix", gen.matrix, "always write a distance matrix");
  gen_cmd->add_option("--dist", gen.dist, "uniform|point-mass|near-point-mass|random")
      ->check(CLI::IsMember({"uniform", "point-mass", "near-point-mass", "random"}));
  gen_cmd->add_option("--dist-out", gen.dist_out, "distribution output path");
  gen_cmd->add_option("--at", gen.at, "point for point-mass distributions");
  gen_cmd->add_option("--heavy", gen.heavy, "heavy mass for near-point-mass");

  NetOpts net;
  auto* net_cmd = app.add_subcommand("net-build", "build the greedy net hierarchy (JSON)");
  auto* embed_cmd = app.add_subcommand("embed", "build the tree embedding (indented text)");
  for (auto* cmd : {net_cmd, embed_cmd}) {
    cmd->add_option("--space", net.space, "space file (matrix CSV or point list)")->required();
    cmd->add_option("--epsilon", net.epsilon, "proximity parameter")->capture_default_str();
    cmd->add_option("--shuffle-seed", net.shuffle_seed, "visit points in a seeded random order");
  }

  WassersteinOpts w;
  auto* w_cmd = app.add_subcommand("wasserstein", "exact W_d(p, q) with plan and certificate check");
  w_cmd->add_option("--space", w.space, "space file")->required();
  w_cmd->add_option("--p", w.p, "distribution p (CSV)")->required();
  w_cmd->add_option("--q", w.q, "distribution q (CSV)")->required();

  TestOpts t;
  auto* test_cmd = app.add_subcommand("test", "run the identity tester");
  test_cmd->add_option("--mode", t.mode, "worst|instance")->check(CLI::IsMember({"worst", "instance"}));
  test_cmd->add_option("--epsilon", t.epsilon, "proximity parameter (default 0.2)");
  test_cmd->add_option("--trials", t.trials, "independent runs")->check(CLI::PositiveNumber);
  test_cmd->add_option("--space", t.space, "space file (default: 2-D linf grid, h = 1/8)");
  test_cmd->add_option("--hierarchy", t.hierarchy, "greedy|lattice")->check(CLI::IsMember({"greedy", "lattice"}));
  test_cmd->add_option("--p", t.p, "reference distribution file (default: uniform)");
  test_cmd->add_option("--q", t.q, "q file, equal-to-p or far-instance (default: equal-to-p)");
  test_cmd->add_option("--q-label", t.q_label, "null|far")->check(CLI::IsMember({"null", "far"}));
  test_cmd->add_option("--certificate", t.certificate, "stored exact W_d(p,q) for a far label");
  test_cmd->add_option("--budget-constant", t.budget_constant, "sample budget constant c");
  test_cmd->add_option("--threads", t.threads, "worker threads (0 = all cores)");
  test_cmd->add_flag("--full", t.full, "include every per-trial report");

  BenchOpts b;
  auto* bench_cmd = app.add_subcommand("bench-scaling", "budget formulas on unit cubes, log-log slopes (CSV)");
  bench_cmd->add_option("--dims", b.dims, "dimensions")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--eps", b.eps, "epsilon grid (>= 4 values)")->delimiter(',')->capture_default_str();
  bench_cmd->add_option("--budget-constant", b.budget_constant, "sample budget constant c")->capture_default_str();

  CalibrateOpts cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "sweep the budget constant on null and far instances (CSV)");
  cal_cmd->add_option("--constants", cal.constants, "budget constants")->delimiter(',')->capture_default_str();
  cal_cmd->add_option("--trials", cal.trials, "trials per point")->check(CLI::PositiveNumber)->capture_default_str();
  cal_cmd->add_option("--mode", cal.mode, "worst|instance")->check(CLI::IsMember({"worst", "instance"}));
  cal_cmd->add_option("--epsilon", cal.epsilon, "proximity parameter");

  for (auto* cmd : app.get_subcommands({})) cmd->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitAccept : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return run_gen_space(g, gen);
    if (net_cmd->parsed()) return run_net_build(g, net);
    if (embed_cmd->parsed()) return run_embed(g, net);
    if (w_cmd->parsed()) return run_wasserstein(g, w);
    if (test_cmd->parsed()) return run_test(g, t, app);
    if (bench_cmd->parsed()) return run_bench(g, b);
    if (cal_cmd->parsed()) return run_calibrate(g, cal, app);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
