#include <gtest/gtest.h>

#include <filesystem>

#include "nlos/error.hpp"
#include "nlos/io.hpp"

namespace nlos {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("nlos_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(Format, NineSignificantDigits) {
  EXPECT_EQ(format_double(1.0 / 3.0), "0.333333333");
  EXPECT_EQ(format_double(10.31), "10.31");
  EXPECT_EQ(format_double(123456789.123), "123456789");
  EXPECT_EQ(round9(2.0 / 3.0), 0.666666667);
}

TEST(ScenarioFile, RoundTrip) {
  Scenario s = paper_scenario(7, 6);
  s.connectivity = Connectivity::kRadiusLimited;
  s.radius = 12.5;
  const std::string text = serialize_scenario(s);
  const Scenario back = parse_scenario(text);
  EXPECT_EQ(serialize_scenario(back), text);
  EXPECT_EQ(back.seed, 7u);
  EXPECT_EQ(back.n_anchors(), 18);
  EXPECT_EQ(back.connectivity, Connectivity::kRadiusLimited);
  EXPECT_EQ(back.radius, 12.5);
  EXPECT_EQ(back.notes, s.notes);
}

TEST(ScenarioFile, RejectsMalformed) {
  EXPECT_THROW(parse_scenario("{"), InvalidInput);
  EXPECT_THROW(parse_scenario(R"({"format":"other"})"), InvalidInput);
  Scenario s = paper_scenario(1, 1);
  s.sensors[0] = {50, 0};
  EXPECT_THROW(parse_scenario(scenario_to_json(s).dump()), InvalidInput);
}

TEST(Csv, MeasurementsRoundTrip) {
  const std::vector<RangeMeasurement> m{{1, 2, 5.25, EdgeKind::kUnknown, 1.0},
                                        {1, 3, 1.0 / 3.0, EdgeKind::kNlosPrior, 0.5},
                                        {2, 3, 7.0, EdgeKind::kLosPrior, 2.0}};
  const std::string text = measurements_csv(m);
  EXPECT_EQ(text.substr(0, text.find('\n')), "i,j,distance,kind,weight");
  const auto back = parse_measurements_csv(text);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[1].kind, EdgeKind::kNlosPrior);
  EXPECT_EQ(back[1].distance, 0.333333333);
  EXPECT_EQ(back[2].weight, 2.0);
  EXPECT_EQ(measurements_csv(back), text);
}

TEST(Csv, BoundsRoundTrip) {
  const std::vector<DistanceBounds> b{{1, 2, 0.0, 7.5, true}, {1, 3, 4.0, 4.0, false}};
  const auto back = parse_bounds_csv(bounds_csv(b));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_FALSE(back[1].consistent);
  EXPECT_EQ(back[0].upper, 7.5);
  EXPECT_EQ(bounds_csv(back), bounds_csv(b));
}

TEST(Csv, RejectsBadRows) {
  EXPECT_THROW(parse_measurements_csv("a,b\n"), InvalidInput);
  EXPECT_THROW(parse_measurements_csv("i,j,distance,kind,weight\n1,2,x,unknown,1\n"), InvalidInput);
  EXPECT_THROW(parse_measurements_csv("i,j,distance,kind,weight\n1,2,3,unknown\n"), InvalidInput);
  EXPECT_THROW(parse_bounds_csv("i,j,lower,upper,consistent\n1,2,3,4,maybe\n"), InvalidInput);
  EXPECT_THROW(parse_measurements_csv(""), InvalidInput);
}

TEST(Csv, Positions) {
  const std::map<NodeId, Point2> est{{1, {1, 2}}, {2, {3, 4}}};
  EXPECT_EQ(positions_csv(est), "id,x,y\n1,1,2\n2,3,4\n");
  EXPECT_EQ(positions_csv({{1, {1, 2}}}, {{1, {1, 0}}}), "id,x,y,true_x,true_y,sq_error\n1,1,2,1,0,4\n");
  EXPECT_THROW(positions_csv(est, {{1, {0, 0}}}), InvalidInput);
}

TEST(Files, AtomicWrite) {
  const fs::path dir = scratch_dir("atomic");
  write_atomic(dir / "a.txt", "hello");
  write_atomic(dir / "a.txt", "world");
  EXPECT_EQ(read_text(dir / "a.txt"), "world");
  EXPECT_FALSE(fs::exists(dir / "a.txt.tmp"));
  EXPECT_THROW(write_atomic(dir / "missing" / "a.txt", "x"), IoError);
  EXPECT_THROW(read_text(dir / "nothing.txt"), IoError);
}

TEST(Reports, EstimationReportFields) {
  EstimationReport r;
  r.positions = {{1, {1, 2}}};
  r.per_sensor_sq_error = {{1, 0.5}};
  r.mse = 0.5;
  r.lift_gap = {{1, 1e-9}};
  r.inconsistent_edges = {{1, 2, 4, 4, false}};
  const auto j = report_to_json(r);
  EXPECT_EQ(j["format"], "nlos-report/1");
  EXPECT_EQ(j["mse_m2"], 0.5);
  EXPECT_EQ(j["sensors"][0]["sq_error"], 0.5);
  EXPECT_EQ(j["config"]["mode"], "midpoint-consistent");
  EXPECT_EQ(j["inconsistent_edges"].size(), 1u);
  EXPECT_EQ(j["solver"]["status"], "optimal");
}

}  // namespace
}  // namespace nlos
