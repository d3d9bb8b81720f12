#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "umpc/cli.hpp"

using namespace umpc;
using namespace umpc::cli;
namespace fs = std::filesystem;

namespace {

constexpr const char* kMinimal = R"(name = "tiny"
duration_s = 3.0

[[robots]]
id = "r1"
waypoints_m = [[0.0, 0.0], [1.0, 0.0]]
)";

fs::path scenario(const std::string& name) {
  return fs::path(UMPC_SCENARIO_DIR) / (name + ".toml");
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           (std::string("umpc_cli_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string read(const fs::path& p) const {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path dir_;
};

std::string config_error(const std::string& text) {
  try {
    parse_scenario(text, "cfg.toml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ParseScenario, MinimalFileUsesDefaults) {
  const sim::ScenarioConfig c = parse_scenario(kMinimal, "tiny.toml");
  EXPECT_EQ(c.name, "tiny");
  EXPECT_DOUBLE_EQ(c.duration, 3.0);
  ASSERT_EQ(c.robots.size(), 1u);
  EXPECT_EQ(c.robots[0].id, "r1");
  EXPECT_DOUBLE_EQ(c.robots[0].radius, 0.75);
  EXPECT_EQ(c.robots[0].initial.position(), Vec2(0.0, 0.0));
  EXPECT_NEAR(c.mpc.s_ref, geometry::chi2_threshold(0.95).s, 1e-15);
  EXPECT_EQ(c.mpc.n_horizon, 15);
  EXPECT_TRUE(c.obstacle_constraints);
}

TEST(ParseScenario, BundledScenariosLoad) {
  for (const char* name : {"chicken", "crossing", "single"}) {
    EXPECT_NO_THROW(load_scenario(scenario(name))) << name;
  }
  const sim::ScenarioConfig c = load_scenario(scenario("chicken"));
  EXPECT_EQ(c.robots.size(), 2u);
  EXPECT_DOUBLE_EQ(c.clearance_margin, 0.05);
  EXPECT_DOUBLE_EQ(c.robots[0].radius + c.robots[1].radius, 1.5);
}

TEST(ParseScenario, SyntaxErrorIsLineAnchored) {
  const std::string msg = config_error("name = \"x\"\nduration_s = = 3\n");
  EXPECT_EQ(msg.rfind("cfg.toml:2:", 0), 0u) << msg;
}

TEST(ParseScenario, UnknownKeyIsReported) {
  std::string text = kMinimal;
  text += "radius_mm = 3\n";
  const std::string msg = config_error(text);
  EXPECT_EQ(msg.rfind("cfg.toml:7:", 0), 0u) << msg;
  EXPECT_NE(msg.find("radius_mm"), std::string::npos);
}

TEST(ParseScenario, UnknownNestedKeyIsQualified) {
  const std::string msg =
      config_error(std::string(kMinimal) + "\n[mpc]\nn_horizon = 10\nhorizon = 3\n");
  EXPECT_NE(msg.find("mpc.horizon"), std::string::npos) << msg;
  EXPECT_EQ(msg.rfind("cfg.toml:10:", 0), 0u) << msg;
}

TEST(ParseScenario, TypeAndRangeErrors) {
  EXPECT_NE(config_error("duration_s = \"long\"\n").find("duration_s must be a number"),
            std::string::npos);
  EXPECT_NE(config_error("chance_p = 1.5\n").find("chance_p must be in (0, 1)"),
            std::string::npos);
  EXPECT_NE(config_error("name = \"x\"\n").find("[[robots]]"), std::string::npos);
  const std::string bad_point = config_error(
      "[[robots]]\nid = \"a\"\nwaypoints_m = [[0.0, 0.0, 1.0]]\n");
  EXPECT_EQ(bad_point.rfind("cfg.toml:3:", 0), 0u) << bad_point;
  const std::string dup = config_error(
      "[[robots]]\nid = \"a\"\nwaypoints_m = [[0.0, 0.0]]\n"
      "[[robots]]\nid = \"a\"\nwaypoints_m = [[1.0, 0.0]]\n");
  EXPECT_NE(dup.find("duplicate robot id"), std::string::npos) << dup;
}

TEST(LoadScenario, MissingFileIsIoError) {
  EXPECT_THROW(load_scenario("/nonexistent/scenario.toml"), IoError);
}

TEST(CsvField, Rfc4180Quoting) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
  EXPECT_EQ(csv_field(""), "");
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(-3.0), "-3");
  EXPECT_EQ(format_double(0.1 + 0.2), "0.30000000000000004");
  EXPECT_EQ(std::stod(format_double(std::numbers::pi)), std::numbers::pi);
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
}

TEST_F(TempDir, RunSingleWritesOutputs) {
  RunManifest m;
  m.config_path = scenario("single");
  m.out_dir = dir_;
  std::ostringstream out;
  std::ostringstream err;
  ASSERT_EQ(cmd_run(m, out, err), kExitOk) << err.str();
  for (const char* f : {"log.csv", "plans.csv", "forecasts.csv", "distances.csv", "timing.csv",
                        "summary.json", "trajectory_solo.svg"}) {
    EXPECT_TRUE(fs::exists(dir_ / f)) << f;
  }
  const std::string log = read(dir_ / "log.csv");
  EXPECT_EQ(log.rfind("time_s,robot_id,x_m,y_m,phi_rad,v_mps,omega_radps,cmd_v_mps,"
                      "cmd_omega_radps,mode,status,iterations,s_opt,objective\r\n",
                      0),
            0u);
  const auto summary = nlohmann::json::parse(read(dir_ / "summary.json"));
  EXPECT_EQ(summary["scenario"], "single");
  EXPECT_TRUE(summary["min_distance_m"].is_null());
  EXPECT_FALSE(summary["collision"].get<bool>());
  EXPECT_TRUE(summary["arrival_time_s"]["solo"].is_number());
  EXPECT_NE(out.str().find("solo: arrived"), std::string::npos);
}

TEST_F(TempDir, RunChickenAvoidsAndPlots) {
  RunManifest m;
  m.config_path = scenario("chicken");
  m.out_dir = dir_;
  std::ostringstream out;
  std::ostringstream err;
  ASSERT_EQ(cmd_run(m, out, err), kExitOk) << err.str();
  const auto summary = nlohmann::json::parse(read(dir_ / "summary.json"));
  EXPECT_GE(summary["min_distance_m"].get<double>(), 1.5);
  EXPECT_EQ(summary["degraded_cycles"].get<int>(), 0);
  const std::string svg = read(dir_ / "trajectory_a.svg");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("#2ca02c"), std::string::npos);
  EXPECT_NE(svg.find("#1f77b4"), std::string::npos);
  EXPECT_NE(svg.find("#e377c2"), std::string::npos);
}

TEST_F(TempDir, RunWithoutConstraintsReportsCollision) {
  RunManifest m;
  m.config_path = scenario("chicken");
  m.out_dir = dir_;
  m.disable_obstacle_constraints = true;
  std::ostringstream out;
  std::ostringstream err;
  EXPECT_EQ(cmd_run(m, out, err), kExitCollision);
  EXPECT_NE(err.str().find("collision"), std::string::npos);
  const auto summary = nlohmann::json::parse(read(dir_ / "summary.json"));
  EXPECT_TRUE(summary["collision"].get<bool>());
  EXPECT_LT(summary["min_distance_m"].get<double>(), 1.5);
}

TEST_F(TempDir, MalformedConfigExitsOne) {
  fs::create_directories(dir_);
  const fs::path cfg = dir_ / "bad.toml";
  std::ofstream(cfg) << "name = \"bad\"\n[[robots]]\nid = \"a\"\nwaypoints_m = [[0.0, 0.0]\n";
  RunManifest m;
  m.config_path = cfg;
  m.out_dir = dir_ / "out";
  std::ostringstream out;
  std::ostringstream err;
  EXPECT_EQ(cmd_run(m, out, err), kExitConfigError);
  EXPECT_NE(err.str().find(cfg.string() + ":4:"), std::string::npos) << err.str();
  EXPECT_FALSE(fs::exists(dir_ / "out"));
}

TEST_F(TempDir, MissingConfigExitsOne) {
  RunManifest m;
  m.config_path = dir_ / "absent.toml";
  m.out_dir = dir_;
  std::ostringstream out;
  std::ostringstream err;
  EXPECT_EQ(cmd_run(m, out, err), kExitConfigError);
}

TEST_F(TempDir, UnwritableOutputExitsThree) {
  fs::create_directories(dir_);
  std::ofstream(dir_ / "file") << "x";
  RunManifest m;
  m.config_path = scenario("single");
  m.out_dir = dir_ / "file" / "sub";
  std::ostringstream out;
  std::ostringstream err;
  EXPECT_EQ(cmd_run(m, out, err), kExitIoError);
}

TEST_F(TempDir, RegionsRectangleLargerThanEllipse) {
  RegionsRequest r;
  r.p = 0.9;
  r.sigma = geometry::Covariance2(2.0, 0.8, 1.0);
  r.out_dir = dir_;
  std::ostringstream out;
  std::ostringstream err;
  ASSERT_EQ(cmd_regions(r, out, err), kExitOk);
  EXPECT_TRUE(fs::exists(dir_ / "regions.svg"));
  std::istringstream lines(out.str());
  std::string key;
  double ellipse = 0.0, enlarged = 0.0, rectangle = 0.0, ratio = 0.0;
  lines >> key >> ellipse >> key >> enlarged >> key >> rectangle >> key >> ratio;
  EXPECT_GT(rectangle, ellipse);
  EXPECT_GT(enlarged, ellipse);
  EXPECT_NEAR(ratio, rectangle / ellipse, 1e-12);
}

TEST(RegionAreas, IdentityCircleAndZeroEnlargement) {
  RegionsRequest r;
  r.p = 0.9;
  r.sigma = geometry::Covariance2::isotropic(1.0);
  r.r_sum = 0.0;
  const RegionAreas a = region_areas(r);
  const double s = geometry::chi2_threshold(0.9).s;
  EXPECT_NEAR(a.ellipse, std::numbers::pi * s * s, 1e-12);
  EXPECT_NEAR(a.enlarged, a.ellipse, 1e-12);
}

TEST_F(TempDir, RegionsRejectsInvalidInput) {
  RegionsRequest r;
  r.sigma = geometry::Covariance2::isotropic(1.0);
  r.r_sum = -1.0;
  r.out_dir = dir_;
  std::ostringstream out;
  std::ostringstream err;
  EXPECT_EQ(cmd_regions(r, out, err), kExitConfigError);
  r.r_sum = 1.5;
  r.p = 1.0;
  EXPECT_EQ(cmd_regions(r, out, err), kExitConfigError);
}

TEST(ErrorMap, IsotropicHasNoError) {
  ErrorMapRequest r;
  r.sigma = geometry::Covariance2::isotropic(0.5);
  for (const ErrorSample& e : error_map(r)) EXPECT_LE(std::abs(e.error), 1e-6 * r.r_sum);
}

TEST(ErrorMap, AnisotropicZerosOnAxesOnly) {
  ErrorMapRequest r;
  r.sigma = geometry::Covariance2(25.0, 0.0, 1.0);
  r.resolution = 360;
  const std::vector<ErrorSample> map = error_map(r);
  ASSERT_EQ(map.size(), 360u);
  for (int k : {0, 90, 180, 270}) EXPECT_LE(std::abs(map[k].error), 1e-6 * r.r_sum) << k;
  for (int k : {45, 135, 225, 315}) EXPECT_GT(std::abs(map[k].error), 1e-3 * r.r_sum) << k;
}

TEST_F(TempDir, ErrorMapWritesCsvAndRejectsLowResolution) {
  ErrorMapRequest r;
  r.sigma = geometry::Covariance2(4.0, 1.0, 1.0);
  r.resolution = 32;
  r.out_dir = dir_;
  std::ostringstream out;
  std::ostringstream err;
  ASSERT_EQ(cmd_error_map(r, out, err), kExitOk);
  const std::string csv = read(dir_ / "error_map.csv");
  EXPECT_EQ(csv.rfind("theta_rad,error_m\r\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 33);
  EXPECT_TRUE(fs::exists(dir_ / "error_map.svg"));
  r.resolution = 8;
  EXPECT_EQ(cmd_error_map(r, out, err), kExitConfigError);
  EXPECT_THROW(error_map(r), std::invalid_argument);
}

TEST(TrajectorySvg, UnknownRobotThrows) {
  const sim::SimLog log = sim::run_scenario(parse_scenario(kMinimal, "tiny.toml"));
  EXPECT_THROW(trajectory_svg(log, "nobody"), std::invalid_argument);
  EXPECT_NO_THROW(trajectory_svg(log, "r1"));
}
