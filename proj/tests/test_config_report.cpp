#include "dronenav/config.hpp"
#include "dronenav/mission_io.hpp"
#include "dronenav/report.hpp"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace dronenav;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string config_error(const json& doc) {
  try {
    mission_config_from_json(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

OutcomeRecord record(int index, const std::string& label, double x, double y, bool landed = true) {
  OutcomeRecord r;
  r.mission_index = index;
  r.label = label;
  r.seed = 100 + static_cast<std::uint64_t>(index);
  r.status = landed ? "finished" : "timeout";
  r.landed = landed;
  r.truth = Vec3(x, y, 0.0);
  r.estimate = Vec3(x + 0.01, y, 0.0);
  r.distance = std::hypot(x, y);
  r.estimate_error = 0.01;
  r.on_platform = std::abs(x) <= 0.5 && std::abs(y) <= 0.5;
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dronenav_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
  const MissionConfig c = mission_config_from_json(json::object());
  EXPECT_EQ(c.path.h, 45.0);
  EXPECT_EQ(c.path.r, 6.0);
  EXPECT_EQ(c.dt, 0.02);
  EXPECT_EQ(c.sensors.enabled, SourceSet::all());
  EXPECT_NEAR(resolve_geometry(c).path.d, 100.03, 1e-12);
}

TEST(Config, ShippedDefaultParses) {
  const MissionConfig c = load_mission_config(fs::path(DRONENAV_SOURCE_DIR) / "configs" / "default_mission.json");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ShortSeparationNamesPathParams) {
  const std::string msg = config_error(json::parse(R"({"mission": {"start": [-10, 0, 0]}})"));
  EXPECT_NE(msg.find("PathParams"), std::string::npos) << msg;
}

TEST(Config, SpeedsNeedFiveEntries) {
  const std::string msg = config_error(json::parse(R"({"path": {"speeds": [1, 2, 3, 4]}})"));
  EXPECT_NE(msg.find("path.speeds"), std::string::npos) << msg;
}

TEST(Config, UnknownKeysAndTypesAllReported) {
  const std::string msg = config_error(json::parse(R"({
    "mission": {"seed": "seven", "colour": 1},
    "sensors": {"sdk": {"rate": 10, "jitter": 0.1}, "enabled": ["sdk", "radar"]},
    "telemetry": {}
  })"));
  EXPECT_NE(msg.find("mission.seed"), std::string::npos) << msg;
  EXPECT_NE(msg.find("mission.colour"), std::string::npos) << msg;
  EXPECT_NE(msg.find("sensors.sdk.jitter"), std::string::npos) << msg;
  EXPECT_NE(msg.find("sensors.enabled"), std::string::npos) << msg;
  EXPECT_NE(msg.find("telemetry"), std::string::npos) << msg;
  EXPECT_NE(msg.find("5 problems"), std::string::npos) << msg;
}

TEST(Config, ReadJsonReportsSyntax) {
  const fs::path dir = fresh_dir("syntax");
  write_text_file(dir / "bad.json", "{\"mission\": {\"seed\": 1,}");
  EXPECT_THROW(read_json_file(dir / "bad.json"), ConfigError);
  EXPECT_THROW(read_json_file(dir / "missing.json"), ConfigError);
}

TEST(Batch, ExpansionOrderSeedsAndLabels) {
  const json doc = json::parse(R"({
    "batch": {"trials": 3, "root_seed": 40, "combinations": [["sdk"], ["sdk", "uwb"]]}
  })");
  const std::vector<BatchMission> ms = expand_batch(batch_spec_from_json(doc));
  ASSERT_EQ(ms.size(), 6u);
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(ms[static_cast<std::size_t>(i)].index, i);
    EXPECT_EQ(ms[static_cast<std::size_t>(i)].config.seed, 40u + static_cast<unsigned>(i));
  }
  EXPECT_EQ(ms[0].config.label, "sdk");
  EXPECT_EQ(ms[3].config.label, "sdk+uwb");
  EXPECT_EQ(ms[3].config.sensors.enabled, SourceSet::parse({"sdk", "uwb"}));
}

TEST(Batch, SweepOverridesParameter) {
  const json doc = json::parse(R"({
    "batch": {"trials": 2, "root_seed": 1, "combinations": [["sdk"]],
              "sweep": {"parameter": "field.k_f", "values": [0.5, 2.0]}}
  })");
  const std::vector<BatchMission> ms = expand_batch(batch_spec_from_json(doc));
  ASSERT_EQ(ms.size(), 4u);
  EXPECT_EQ(ms[0].config.path.k_f, 0.5);
  EXPECT_EQ(ms[3].config.path.k_f, 2.0);
  EXPECT_EQ(ms[0].config.label, "sdk|field.k_f=0.5");
  EXPECT_EQ(ms[3].config.label, "sdk|field.k_f=2.0");
}

TEST(Batch, InvalidSpecs) {
  EXPECT_THROW(batch_spec_from_json(json::object()), ConfigError);
  EXPECT_THROW(batch_spec_from_json(json::parse(R"({"batch": {"trials": 0, "combinations": [["sdk"]]}})")),
               ConfigError);
  EXPECT_THROW(batch_spec_from_json(json::parse(R"({"batch": {"trials": 1, "combinations": [["uwb"]]}})")),
               ConfigError);
}

TEST(TrajectoryCsv, HeaderSchemaIsPinned) {
  MissionConfig c;
  c.max_time = 0.1;
  std::ostringstream out;
  write_trajectory_csv(run_mission(c), out);
  std::istringstream in(out.str());
  std::string comment, header;
  std::getline(in, comment);
  std::getline(in, header);
  EXPECT_EQ(comment.rfind("# dronenav trajectory v1;", 0), 0u) << comment;
  EXPECT_EQ(header,
            "time_s,truth_x_m,truth_y_m,truth_z_m,truth_roll_rad,truth_pitch_rad,truth_yaw_rad,"
            "est_x_m,est_y_m,est_z_m,est_roll_rad,est_pitch_rad,est_yaw_rad,"
            "est_gps_bias_x_m,est_gps_bias_y_m,est_gps_bias_z_m,"
            "est_gyro_bias_x_rad_s,est_gyro_bias_y_rad_s,est_gyro_bias_z_rad_s,"
            "var_0,var_1,var_2,var_3,var_4,var_5,var_6,var_7,var_8,var_9,var_10,var_11,"
            "sector,lyapunov_m2,cmd_vx_m_s,cmd_vy_m_s,cmd_vz_m_s,xi,direction,"
            "m_sdk,m_aruco_large,m_aruco_small,m_uwb");
  int rows = 0;
  for (std::string line; std::getline(in, line);) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), std::count(header.begin(), header.end(), ','));
  }
  EXPECT_EQ(rows, 5);
}

TEST(FormatDouble, RoundTrips) {
  std::mt19937_64 rng(131);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(Outcome, JsonRoundTrip) {
  MissionConfig c;
  c.seed = 3;
  c.label = "sdk+uwb";
  const MissionLog log = run_mission(c);
  const json j = outcome_json(log, 12);
  EXPECT_EQ(j.at("schema"), kOutcomeSchema);
  const OutcomeRecord r = outcome_from_json(json::parse(j.dump()));
  EXPECT_EQ(r.mission_index, 12);
  EXPECT_EQ(r.label, "sdk+uwb");
  EXPECT_EQ(r.seed, 3u);
  ASSERT_TRUE(log.landing);
  EXPECT_EQ(r.distance, log.landing->distance);
  EXPECT_EQ(r.truth, log.landing->truth);
  EXPECT_EQ(j.at("landing_error_m").get<double>(), log.landing->distance);

  json broken = j;
  broken.erase("seed");
  EXPECT_THROW(outcome_from_json(broken), ReportError);
  EXPECT_THROW(outcome_from_json(json::parse(R"({"schema": "other"})")), ReportError);
}

TEST(Summary, StatisticsMatchHandComputation) {
  const std::vector<OutcomeRecord> records = {record(3, "a", 0.1, 0.2), record(0, "b", 1.2, -0.4),
                                              record(1, "a", -0.3, 0.0), record(2, "a", 0.0, 0.0, false),
                                              record(4, "b", 0.2, 0.1)};
  const json s = summarize(records);
  EXPECT_EQ(s.at("schema"), "dronenav.summary/1");
  ASSERT_EQ(s.at("combinations").size(), 2u);
  // Groups appear in order of their first mission index.
  const json& b = s["combinations"][0];
  const json& a = s["combinations"][1];
  EXPECT_EQ(b.at("label"), "b");
  EXPECT_EQ(a.at("label"), "a");

  EXPECT_EQ(a.at("missions"), 3);
  EXPECT_EQ(a.at("landed"), 2);
  EXPECT_EQ(a.at("platform_hits"), 2);
  EXPECT_NEAR(a.at("hit_rate").get<double>(), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(a.at("mean_landing_distance_m").get<double>(), (std::hypot(0.1, 0.2) + 0.3) / 2, 1e-15);
  EXPECT_NEAR(a.at("max_landing_distance_m").get<double>(), 0.3, 1e-15);
  EXPECT_EQ(a.at("statuses").at("timeout"), 1);

  EXPECT_EQ(b.at("platform_hits"), 1);
  EXPECT_NEAR(b.at("hit_rate").get<double>(), 0.5, 1e-15);
  EXPECT_NEAR(b.at("max_landing_distance_m").get<double>(), std::hypot(1.2, 0.4), 1e-15);

  ASSERT_EQ(s.at("missions").size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(s["missions"][static_cast<std::size_t>(i)].at("mission_index"), i);

  // Input order does not matter.
  std::vector<OutcomeRecord> shuffled(records.rbegin(), records.rend());
  EXPECT_EQ(summarize(shuffled).dump(), s.dump());
}

TEST(Summary, EllipseMatchesEigenDecomposition) {
  std::mt19937_64 rng(137);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Eigen::Vector2d> pts;
  for (int i = 0; i < 200; ++i) {
    const double u = n(rng), v = n(rng);
    pts.emplace_back(0.3 + 0.2 * u, -0.1 + 0.1 * u + 0.05 * v);
  }
  const auto e = scatter_ellipse(pts);
  ASSERT_TRUE(e);
  Eigen::MatrixXd m(2, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = pts[i];
  const Eigen::Vector2d mean = m.rowwise().mean();
  const Eigen::MatrixXd centred = m.colwise() - mean;
  const Eigen::Matrix2d cov = centred * centred.transpose() / static_cast<double>(pts.size() - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  EXPECT_LT((e->center - mean).norm(), 1e-12);
  EXPECT_LT((e->covariance - cov).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(e->semi_major, 2 * std::sqrt(eig.eigenvalues()(1)), 1e-12);
  EXPECT_NEAR(e->semi_minor, 2 * std::sqrt(eig.eigenvalues()(0)), 1e-12);
  const Eigen::Vector2d axis(std::cos(e->angle), std::sin(e->angle));
  EXPECT_NEAR(std::abs(axis.dot(eig.eigenvectors().col(1))), 1.0, 1e-9);
  EXPECT_FALSE(scatter_ellipse({Eigen::Vector2d::Zero()}));
}

TEST(Report, ReloadGivesSameSummary) {
  const fs::path dir = fresh_dir("report");
  std::vector<OutcomeRecord> records;
  for (int i = 0; i < 4; ++i) {
    MissionConfig c;
    c.seed = 50 + static_cast<std::uint64_t>(i);
    c.label = i % 2 ? "sdk" : "sdk+uwb";
    c.sensors.enabled = i % 2 ? SourceSet::sdk_only() : SourceSet::parse({"sdk", "uwb"});
    const MissionLog log = run_mission(c);
    write_mission_artifacts(log, i, dir / "missions" / std::to_string(i), false);
    records.push_back(outcome_from_json(json::parse(outcome_json(log, i).dump())));
  }
  EXPECT_FALSE(fs::exists(dir / "missions" / "0" / "trajectory.csv"));
  EXPECT_TRUE(fs::exists(dir / "missions" / "0" / "events.json"));
  const std::vector<OutcomeRecord> loaded = load_outcomes(dir);
  ASSERT_EQ(loaded.size(), 4u);
  EXPECT_EQ(dump_json(summarize(loaded)), dump_json(summarize(records)));
  EXPECT_EQ(landing_scatter_csv(loaded), landing_scatter_csv(records));
}

TEST(Report, EmptyOrCorruptDirectories) {
  const fs::path dir = fresh_dir("empty");
  EXPECT_THROW(load_outcomes(dir), ReportError);
  EXPECT_THROW(load_outcomes(dir / "nope"), ReportError);
  write_text_file(dir / "m" / "outcome.json", "{ not json");
  EXPECT_THROW(load_outcomes(dir), ReportError);
}
