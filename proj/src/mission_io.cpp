#include "dronenav/mission_io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <stdexcept>

namespace dronenav {

namespace {

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

int flag_value(MeasurementFlag f) { return static_cast<int>(f); }

}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

const std::vector<std::string>& trajectory_columns() {
  static const std::vector<std::string> columns = [] {
    std::vector<std::string> c = {"time_s",
                                  "truth_x_m", "truth_y_m", "truth_z_m",
                                  "truth_roll_rad", "truth_pitch_rad", "truth_yaw_rad",
                                  "est_x_m", "est_y_m", "est_z_m",
                                  "est_roll_rad", "est_pitch_rad", "est_yaw_rad",
                                  "est_gps_bias_x_m", "est_gps_bias_y_m", "est_gps_bias_z_m",
                                  "est_gyro_bias_x_rad_s", "est_gyro_bias_y_rad_s", "est_gyro_bias_z_rad_s"};
    for (int i = 0; i < kStateDim; ++i) c.push_back("var_" + std::to_string(i));
    for (const char* name : {"sector", "lyapunov_m2", "cmd_vx_m_s", "cmd_vy_m_s", "cmd_vz_m_s", "xi",
                             "direction", "m_sdk", "m_aruco_large", "m_aruco_small", "m_uwb"}) {
      c.emplace_back(name);
    }
    return c;
  }();
  return columns;
}

void write_trajectory_csv(const MissionLog& log, std::ostream& out) {
  out << "# dronenav trajectory v" << kTrajectorySchemaVersion
      << "; units m, rad, s; measurement flags 0 none, 1 accepted, 2 rejected\n";
  const auto& cols = trajectory_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const StepRecord& r : log.steps) {
    out << format_double(r.time);
    auto put = [&out](double v) { out << ',' << format_double(v); };
    for (int i = 0; i < 3; ++i) put(r.truth_position(i));
    for (int i = 0; i < 3; ++i) put(r.truth_euler(i));
    for (int i = 0; i < kStateDim; ++i) put(r.mean(i));
    for (int i = 0; i < kStateDim; ++i) put(r.covariance_diagonal(i));
    out << ',' << r.sector;
    put(r.lyapunov);
    for (int i = 0; i < 3; ++i) put(r.command(i));
    out << ',' << (r.xi ? 1 : 0) << ',' << r.direction << ',' << flag_value(r.sdk) << ','
        << flag_value(r.aruco_large) << ',' << flag_value(r.aruco_small) << ',' << flag_value(r.uwb) << '\n';
  }
}

nlohmann::json events_json(const MissionLog& log) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : log.events) {
    events.push_back({{"event", to_string(e.event)}, {"time_s", e.time}});
  }
  return {{"schema", kEventsSchema},
          {"landing_rule",
           {{"type", "threshold"},
            {"horizontal_m", log.landing_thresholds.horizontal},
            {"height_m", log.landing_thresholds.height},
            {"note", "exact position equality replaced by estimated horizontal distance and height thresholds; "
                     "ground contact also ends a descent"}}},
          {"events", events}};
}

nlohmann::json outcome_json(const MissionLog& log, int mission_index) {
  nlohmann::json j;
  j["schema"] = kOutcomeSchema;
  j["mission_index"] = mission_index;
  j["label"] = log.label;
  j["seed"] = log.seed;
  j["status"] = to_string(log.status);
  j["landed"] = log.landing.has_value();
  j["final_time_s"] = log.final_time;
  j["gps_bias_truth_m"] = vec_json(log.gps_bias);
  j["gps_bias_estimate_m"] = vec_json(log.final_bias_estimate);
  j["singular_holds"] = log.singular_holds;
  if (log.landing) {
    const LandingOutcome& l = *log.landing;
    j["landing_error_m"] = l.distance;
    j["landing"] = {{"time_s", l.time},
                    {"truth_m", vec_json(l.truth)},
                    {"estimate_m", vec_json(l.estimate)},
                    {"platform_center_m", vec_json(l.platform_center)},
                    {"distance_m", l.distance},
                    {"estimate_error_m", l.estimate_error},
                    {"on_platform", l.on_platform},
                    {"ground_contact", l.ground_contact}};
  } else {
    j["landing_error_m"] = nullptr;
    j["landing"] = nullptr;
  }
  return j;
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_mission_artifacts(const MissionLog& log, int mission_index, const std::filesystem::path& dir,
                             bool with_trajectory) {
  std::filesystem::create_directories(dir);
  if (with_trajectory) {
    std::ofstream out(dir / "trajectory.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + (dir / "trajectory.csv").string());
    write_trajectory_csv(log, out);
  }
  write_text_file(dir / "events.json", dump_json(events_json(log)));
  write_text_file(dir / "outcome.json", dump_json(outcome_json(log, mission_index)));
}

}  // namespace dronenav
