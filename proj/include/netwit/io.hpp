#pragma once

// File formats: CSV spaces and distributions, point lists, hierarchy / report / cache
// documents (JSON).

#include <cctype>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <ios>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "netwit/error.hpp"
#include "netwit/l1_testers.hpp"
#include "netwit/metric_space.hpp"
#include "netwit/nets.hpp"
#include "netwit/transport.hpp"
#include "netwit/wit.hpp"

namespace netwit::io {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::istringstream ss(s);
  ss.imbue(std::locale::classic());
  ss >> out;
  return !ss.fail() && ss.eof();
}

/// Non-empty, non-comment lines of a stream.
inline std::vector<std::string> content_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << std::setprecision(17);
  return out;
}

inline std::vector<double> numeric_row(const std::vector<std::string>& cells, std::size_t line_no) {
  std::vector<double> row;
  for (const auto& c : cells) {
    double v;
    if (!parse_double(c, v))
      throw FormatError("line " + std::to_string(line_no) + ": '" + c + "' is not a number");
    row.push_back(v);
  }
  return row;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Spaces
// ---------------------------------------------------------------------------

/// Square distance matrix, one row per line; a first row that is not numeric is taken
/// as a header of point labels.
inline FiniteMetricSpace read_matrix_csv(std::istream& in) {
  auto lines = detail::content_lines(in);
  if (lines.empty()) throw FormatError("empty distance matrix");
  std::vector<std::string> labels;
  auto first = detail::split_csv(lines.front());
  double probe;
  if (!detail::parse_double(first.front(), probe)) {
    labels = first;
    lines.erase(lines.begin());
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < lines.size(); ++k)
    rows.push_back(detail::numeric_row(detail::split_csv(lines[k]), k + 1));
  return FiniteMetricSpace::from_rows(rows, std::move(labels));
}

inline FiniteMetricSpace read_matrix_csv(const std::string& path) {
  auto in = detail::open_in(path);
  return read_matrix_csv(in);
}

inline void write_matrix_csv(std::ostream& out, const FiniteMetricSpace& space) {
  const std::size_t n = space.size();
  if (!space.labels().empty()) {
    for (std::size_t a = 0; a < n; ++a) out << (a ? "," : "") << space.labels()[a];
    out << "\n";
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) out << (b ? "," : "") << space(a, b);
    out << "\n";
  }
}

/// Point list: a `metric=euclidean|linf` line, then one comma-separated coordinate row
/// per point.
inline FiniteMetricSpace read_points(std::istream& in) {
  auto lines = detail::content_lines(in);
  if (lines.empty()) throw FormatError("empty point list");
  const std::string head = lines.front();
  const auto eq = head.find('=');
  if (eq == std::string::npos || detail::trim(head.substr(0, eq)) != "metric")
    throw FormatError("point list must start with 'metric=euclidean' or 'metric=linf'");
  const PointMetric metric = parse_point_metric(detail::trim(head.substr(eq + 1)));
  std::vector<std::vector<double>> pts;
  for (std::size_t k = 1; k < lines.size(); ++k)
    pts.push_back(detail::numeric_row(detail::split_csv(lines[k]), k + 1));
  return FiniteMetricSpace::from_points(std::move(pts), metric);
}

inline FiniteMetricSpace read_points(const std::string& path) {
  auto in = detail::open_in(path);
  return read_points(in);
}

inline void write_points(std::ostream& out, const FiniteMetricSpace& space) {
  if (!space.has_points()) throw FormatError("space has no coordinates");
  out << "metric=" << to_string(*space.point_metric()) << "\n";
  for (std::size_t a = 0; a < space.size(); ++a) {
    const auto pt = space.point(a);
    for (std::size_t k = 0; k < pt.size(); ++k) out << (k ? "," : "") << pt[k];
    out << "\n";
  }
}

/// Reads either format: a file whose first content line starts with `metric=` is a
/// point list, anything else a distance matrix.
inline FiniteMetricSpace read_space(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  while (std::getline(in, line)) {
    line = detail::trim(line);
    if (!line.empty() && line[0] != '#') break;
  }
  return line.rfind("metric", 0) == 0 ? read_points(path) : read_matrix_csv(path);
}

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

/// Single column of masses; an optional non-numeric header line is skipped.
inline std::vector<double> read_masses(std::istream& in) {
  auto lines = detail::content_lines(in);
  std::vector<double> m;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    double v;
    if (!detail::parse_double(lines[k], v)) {
      if (k == 0) continue;
      throw FormatError("line " + std::to_string(k + 1) + ": '" + lines[k] + "' is not a mass");
    }
    m.push_back(v);
  }
  return m;
}

inline Distribution read_distribution(const std::string& path, const FiniteMetricSpace& space) {
  auto in = detail::open_in(path);
  return {space, read_masses(in)};
}

inline void write_masses(std::ostream& out, std::span<const double> m) {
  out << "mass\n";
  for (double v : m) out << v << "\n";
}

inline void write_plan_csv(std::ostream& out, const TransportPlan& plan) {
  out << "source,target,mass\n";
  for (const auto& f : plan.flow) out << f.source << "," << f.target << "," << f.mass << "\n";
}

// ---------------------------------------------------------------------------
// Hierarchies
// ---------------------------------------------------------------------------

inline json hierarchy_to_json(const NetHierarchy& h) {
  json doc;
  doc["schema"] = "netwit.hierarchy";
  doc["version"] = kSchemaVersion;
  doc["epsilon"] = h.epsilon();
  doc["l"] = h.l();
  doc["r"] = h.r();
  doc["points"] = h.space().size();
  doc["diameter"] = h.space().diameter();
  json levels = json::array();
  for (const auto& lvl : h.levels())
    levels.push_back({{"level", lvl.level}, {"scale", lvl.scale}, {"centers", lvl.centers},
                      {"assign", lvl.assign}});
  doc["levels"] = std::move(levels);
  return doc;
}

/// Rebuilds a hierarchy on `space`; `validate` re-checks every level with `rule`.
inline NetHierarchy hierarchy_from_json(const json& doc, const FiniteMetricSpace& space,
                                        bool validate = true,
                                        PackingRule rule = PackingRule::strict) {
  if (doc.value("schema", "") != "netwit.hierarchy") throw FormatError("not a hierarchy document");
  if (doc.at("points").get<std::size_t>() != space.size())
    throw SizeMismatch("hierarchy was built for a different number of points");
  std::vector<NetLevel> levels;
  for (const auto& j : doc.at("levels")) {
    NetLevel lvl;
    lvl.level = j.at("level").get<int>();
    lvl.scale = pow2(lvl.level);
    lvl.centers = j.at("centers").get<std::vector<std::size_t>>();
    lvl.assign = j.at("assign").get<std::vector<std::size_t>>();
    if (validate) {
      const auto chk = validate_level(space, lvl, rule);
      if (!chk.ok()) throw FormatError("level " + std::to_string(lvl.level) + ": " + chk.message);
    }
    levels.push_back(std::move(lvl));
  }
  return {space, doc.at("epsilon").get<double>(), doc.at("l").get<int>(), doc.at("r").get<int>(),
          std::move(levels)};
}

// ---------------------------------------------------------------------------
// Tester reports
// ---------------------------------------------------------------------------

inline json report_to_json(const TesterReport& rep) {
  json doc;
  doc["schema"] = "netwit.report";
  doc["version"] = kSchemaVersion;
  doc["mode"] = to_string(rep.mode);
  doc["verdict"] = to_string(rep.verdict);
  doc["epsilon"] = rep.epsilon;
  doc["l"] = rep.l;
  doc["r"] = rep.r;
  doc["total_samples"] = rep.total_samples;
  doc["budget_formula_value"] = rep.budget_formula_value;
  if (rep.seed) doc["seed"] = *rep.seed;
  if (rep.doubling_constant) {
    if (std::isfinite(*rep.doubling_constant))
      doc["doubling_constant"] = *rep.doubling_constant;
    else
      doc["doubling_constant"] = "inf";
  }
  json levels = json::array();
  for (const auto& o : rep.per_level) {
    json j{{"level", o.level},
           {"proximity", o.proximity},
           {"failure_prob", o.failure_prob},
           {"verdict", to_string(o.verdict)},
           {"samples_charged", o.samples_charged},
           {"support", o.support}};
    if (o.decision) {
      j["chi"] = o.decision->statistic.chi;
      j["chi_threshold"] = o.decision->thresholds.chi;
      j["tail"] = o.decision->statistic.tail;
      j["tail_threshold"] = o.decision->thresholds.tail;
    }
    levels.push_back(std::move(j));
  }
  doc["per_level"] = std::move(levels);
  doc["warnings"] = rep.warnings;
  return doc;
}

// ---------------------------------------------------------------------------
// Calibration cache
// ---------------------------------------------------------------------------

inline std::string hex_key(std::uint64_t k) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << k;
  return os.str();
}

inline void save_calibration_cache(const CalibrationCache& cache, const std::string& path) {
  json doc;
  doc["schema"] = "netwit.calibration";
  doc["version"] = kSchemaVersion;
  json entries = json::object();
  for (const auto& [k, t] : cache.snapshot()) entries[hex_key(k)] = {{"chi", t.chi}, {"tail", t.tail}};
  doc["entries"] = std::move(entries);
  auto out = detail::open_out(path);
  out << doc.dump(2) << "\n";
}

/// Merges a persisted cache into `cache`; a missing file is not an error.
inline std::size_t load_calibration_cache(CalibrationCache& cache, const std::string& path) {
  std::ifstream in(path);
  if (!in) return 0;
  json doc = json::parse(in);
  if (doc.value("schema", "") != "netwit.calibration") throw FormatError("not a calibration cache");
  std::size_t loaded = 0;
  for (const auto& [key, val] : doc.at("entries").items()) {
    cache.insert(std::stoull(key, nullptr, 16), {val.at("chi").get<double>(), val.at("tail").get<double>()});
    ++loaded;
  }
  return loaded;
}

}  // namespace netwit::io
