#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "netwit/generators.hpp"
#include "netwit/io.hpp"

using namespace netwit;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "netwit_io_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(MatrixCsv, RoundTripWithAndWithoutHeader) {
  std::istringstream plain("0,1,2\n1,0,1\n2,1,0\n");
  auto s = io::read_matrix_csv(plain);
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(s.diameter(), 2.0);
  EXPECT_TRUE(s.labels().empty());

  std::istringstream labelled("a,b\n0,0.5\n0.5,0\n");
  auto t = io::read_matrix_csv(labelled);
  EXPECT_EQ(t.labels(), (std::vector<std::string>{"a", "b"}));
  std::ostringstream out;
  io::write_matrix_csv(out, t);
  std::istringstream back(out.str());
  auto u = io::read_matrix_csv(back);
  EXPECT_EQ(u.labels(), t.labels());
  EXPECT_EQ(u(0, 1), 0.5);
}

TEST(MatrixCsv, Errors) {
  std::istringstream bad("0,1\n1,x\n");
  EXPECT_THROW(io::read_matrix_csv(bad), FormatError);
  std::istringstream asym("0,1\n2,0\n");
  EXPECT_THROW(io::read_matrix_csv(asym), AsymmetryError);
  std::istringstream empty("");
  EXPECT_THROW(io::read_matrix_csv(empty), FormatError);
  EXPECT_THROW(io::read_matrix_csv(std::string("/nonexistent/space.csv")), FormatError);
}

TEST(PointList, ParsesMetricAndCoordinates) {
  std::istringstream in("metric=linf\n0,0\n3,4\n");
  auto s = io::read_points(in);
  EXPECT_EQ(s(0, 1), 4.0);
  std::ostringstream out;
  io::write_points(out, s);
  EXPECT_EQ(out.str(), "metric=linf\n0,0\n3,4\n");
  std::istringstream bad("0,0\n1,1\n");
  EXPECT_THROW(io::read_points(bad), FormatError);
  std::istringstream unknown("metric=cosine\n0\n");
  EXPECT_THROW(io::read_points(unknown), FormatError);
}

TEST(Masses, HeaderOptional) {
  std::istringstream a("mass\n0.25\n0.75\n"), b("0.5\n0.5\n");
  EXPECT_EQ(io::read_masses(a), (std::vector<double>{0.25, 0.75}));
  EXPECT_EQ(io::read_masses(b), (std::vector<double>{0.5, 0.5}));
  std::istringstream c("0.5\nabc\n");
  EXPECT_THROW(io::read_masses(c), FormatError);
}

TEST(PlanCsv, ColumnOrder) {
  auto s = line_space(2);
  Distribution p(s, {1, 0}), q(s, {0, 1});
  std::ostringstream out;
  io::write_plan_csv(out, wasserstein_exact(p, q));
  EXPECT_EQ(out.str(), "source,target,mass\n0,1,1\n");
}

TEST(HierarchyJson, RoundTripPreservesLevels) {
  auto s = random_point_space(40, 2, PointMetric::euclidean, 5);
  auto h = build_hierarchy(s, 0.2);
  const auto doc = io::hierarchy_to_json(h);
  auto back = io::hierarchy_from_json(doc, s);
  ASSERT_EQ(back.l(), h.l());
  ASSERT_EQ(back.r(), h.r());
  for (int i = h.l(); i <= h.r(); ++i) {
    EXPECT_EQ(back.level(i).centers, h.level(i).centers);
    EXPECT_EQ(back.level(i).assign, h.level(i).assign);
  }
  auto tampered = doc;
  tampered["levels"][0]["centers"] = io::json::array({doc["levels"][0]["centers"][0]});
  EXPECT_THROW(io::hierarchy_from_json(tampered, s), FormatError);
  EXPECT_THROW(io::hierarchy_from_json(doc, line_space(3)), SizeMismatch);
}

TEST(ReportJson, CarriesVerdictLevelsAndSeed) {
  auto g = make_grid(2, 0.25, PointMetric::linf);
  auto h = build_hierarchy(g.space, 0.5);
  TreeEmbedding t(h);
  auto p = Distribution::uniform(g.space);
  VectorSampler q(p, 3);
  auto rep = wit_worst(h, t, p, q, WitConfig{0.5});
  rep.seed = 3;
  const auto doc = io::report_to_json(rep);
  EXPECT_EQ(doc["schema"], "netwit.report");
  EXPECT_EQ(doc["version"], io::kSchemaVersion);
  EXPECT_EQ(doc["verdict"], to_string(rep.verdict));
  EXPECT_EQ(doc["per_level"].size(), rep.per_level.size());
  EXPECT_EQ(doc["seed"], 3u);
  EXPECT_TRUE(doc["per_level"][0].contains("chi_threshold"));
}

TEST(CalibrationCacheFile, SaveLoadRoundTrip) {
  CalibrationCache a;
  a.insert(0x1234abcdULL, {1.5, 2.0});
  a.insert(0xffffffffffffffffULL, {-0.25, 0.0});
  const auto path = temp_file("cache.json");
  io::save_calibration_cache(a, path.string());
  CalibrationCache b;
  EXPECT_EQ(io::load_calibration_cache(b, path.string()), 2u);
  EXPECT_EQ(b.find(0x1234abcdULL)->chi, 1.5);
  EXPECT_EQ(b.find(0xffffffffffffffffULL)->chi, -0.25);
  CalibrationCache c;
  EXPECT_EQ(io::load_calibration_cache(c, (path.string() + ".missing")), 0u);
  std::ofstream(temp_file("notcache.json")) << R"({"schema":"other","entries":{}})";
  EXPECT_THROW(io::load_calibration_cache(c, temp_file("notcache.json").string()), FormatError);
}
