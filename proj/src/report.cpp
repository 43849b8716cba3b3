#include "dronenav/report.hpp"

#include "dronenav/mission_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace dronenav {

namespace {

Vec3 read_vec3(const nlohmann::json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) throw ReportError(std::string("field '") + key + "' must be a 3-array");
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

void sort_by_index(std::vector<OutcomeRecord>& records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const OutcomeRecord& a, const OutcomeRecord& b) { return a.mission_index < b.mission_index; });
}

nlohmann::json nullable(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

OutcomeRecord outcome_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || j.value("schema", "") != kOutcomeSchema) {
      throw ReportError("not a " + std::string(kOutcomeSchema) + " document");
    }
    OutcomeRecord r;
    r.mission_index = j.at("mission_index").get<int>();
    r.label = j.at("label").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.status = j.at("status").get<std::string>();
    r.landed = j.at("landed").get<bool>();
    r.gps_bias = read_vec3(j, "gps_bias_truth_m");
    r.bias_estimate = read_vec3(j, "gps_bias_estimate_m");
    if (r.landed) {
      const auto& l = j.at("landing");
      r.truth = read_vec3(l, "truth_m");
      r.estimate = read_vec3(l, "estimate_m");
      r.platform_center = read_vec3(l, "platform_center_m");
      r.distance = l.at("distance_m").get<double>();
      r.estimate_error = l.at("estimate_error_m").get<double>();
      r.on_platform = l.at("on_platform").get<bool>();
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ReportError(std::string("corrupt outcome: ") + e.what());
  }
}

std::optional<ScatterEllipse> scatter_ellipse(const std::vector<Eigen::Vector2d>& points) {
  if (points.size() < 2) return std::nullopt;
  ScatterEllipse e;
  for (const auto& p : points) e.center += p;
  e.center /= static_cast<double>(points.size());
  for (const auto& p : points) {
    const Eigen::Vector2d d = p - e.center;
    e.covariance += d * d.transpose();
  }
  e.covariance /= static_cast<double>(points.size() - 1);

  const double a = e.covariance(0, 0);
  const double b = e.covariance(0, 1);
  const double c = e.covariance(1, 1);
  const double mid = 0.5 * (a + c);
  const double rad = std::hypot(0.5 * (a - c), b);
  e.semi_major = 2.0 * std::sqrt(std::max(mid + rad, 0.0));
  e.semi_minor = 2.0 * std::sqrt(std::max(mid - rad, 0.0));
  e.angle = 0.5 * std::atan2(2.0 * b, a - c);
  return e;
}

nlohmann::json summarize(std::vector<OutcomeRecord> records) {
  sort_by_index(records);

  std::vector<std::string> order;
  std::map<std::string, std::vector<const OutcomeRecord*>> groups;
  for (const auto& r : records) {
    if (!groups.contains(r.label)) order.push_back(r.label);
    groups[r.label].push_back(&r);
  }

  nlohmann::json combos = nlohmann::json::array();
  for (const auto& label : order) {
    const auto& rows = groups[label];
    int landed = 0;
    int hits = 0;
    double sum_distance = 0.0;
    double max_distance = 0.0;
    double sum_estimate_error = 0.0;
    std::map<std::string, int> statuses;
    std::vector<Eigen::Vector2d> points;
    for (const OutcomeRecord* r : rows) {
      ++statuses[r->status];
      if (!r->landed) continue;
      ++landed;
      if (r->on_platform) ++hits;
      sum_distance += r->distance;
      max_distance = std::max(max_distance, r->distance);
      sum_estimate_error += r->estimate_error;
      points.push_back(r->truth.head<2>());
    }
    const auto n = static_cast<double>(rows.size());
    std::optional<double> mean_distance, max_dist, mean_error;
    if (landed > 0) {
      mean_distance = sum_distance / landed;
      max_dist = max_distance;
      mean_error = sum_estimate_error / landed;
    }
    nlohmann::json ellipse = nullptr;
    if (const auto e = scatter_ellipse(points)) {
      ellipse = {{"center_m", {e->center.x(), e->center.y()}},
                 {"covariance_m2", {{e->covariance(0, 0), e->covariance(0, 1)}, {e->covariance(1, 0), e->covariance(1, 1)}}},
                 {"semi_major_m", e->semi_major},
                 {"semi_minor_m", e->semi_minor},
                 {"angle_rad", e->angle},
                 {"sigmas", 2}};
    }
    combos.push_back({{"label", label},
                      {"missions", rows.size()},
                      {"landed", landed},
                      {"platform_hits", hits},
                      {"hit_rate", static_cast<double>(hits) / n},
                      {"mean_landing_distance_m", nullable(mean_distance)},
                      {"max_landing_distance_m", nullable(max_dist)},
                      {"mean_estimate_error_m", nullable(mean_error)},
                      {"statuses", statuses},
                      {"landing_ellipse_2sigma", ellipse}});
  }

  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json row = {{"mission_index", r.mission_index}, {"label", r.label}, {"seed", r.seed},
                          {"status", r.status}, {"landed", r.landed},
                          {"gps_bias_truth_m", {r.gps_bias.x(), r.gps_bias.y(), r.gps_bias.z()}},
                          {"gps_bias_estimate_m", {r.bias_estimate.x(), r.bias_estimate.y(), r.bias_estimate.z()}}};
    if (r.landed) {
      row["distance_m"] = r.distance;
      row["estimate_error_m"] = r.estimate_error;
      row["on_platform"] = r.on_platform;
    } else {
      row["distance_m"] = nullptr;
      row["estimate_error_m"] = nullptr;
      row["on_platform"] = false;
    }
    rows.push_back(std::move(row));
  }
  return {{"schema", "dronenav.summary/1"}, {"combinations", combos}, {"missions", rows}};
}

std::string landing_scatter_csv(std::vector<OutcomeRecord> records) {
  sort_by_index(records);
  std::ostringstream out;
  out << "mission_index,label,seed,status,landed,truth_x_m,truth_y_m,truth_z_m,est_x_m,est_y_m,est_z_m,"
         "platform_x_m,platform_y_m,distance_m,estimate_error_m,on_platform\n";
  for (const auto& r : records) {
    out << r.mission_index << ',' << r.label << ',' << r.seed << ',' << r.status << ',' << (r.landed ? 1 : 0);
    if (r.landed) {
      for (double v : {r.truth.x(), r.truth.y(), r.truth.z(), r.estimate.x(), r.estimate.y(), r.estimate.z(),
                       r.platform_center.x(), r.platform_center.y(), r.distance, r.estimate_error}) {
        out << ',' << format_double(v);
      }
      out << ',' << (r.on_platform ? 1 : 0) << '\n';
    } else {
      out << ",,,,,,,,,,,0\n";
    }
  }
  return out.str();
}

std::vector<OutcomeRecord> load_outcomes(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ReportError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "outcome.json") files.push_back(entry.path());
  }
  if (files.empty()) throw ReportError("no outcome.json found below " + dir.string());
  std::sort(files.begin(), files.end());

  std::vector<OutcomeRecord> records;
  for (const auto& f : files) {
    std::ifstream in(f);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ReportError("corrupt " + f.string() + ": " + e.what());
    }
    try {
      records.push_back(outcome_from_json(j));
    } catch (const ReportError& e) {
      throw ReportError(f.string() + ": " + e.what());
    }
  }
  return records;
}

}  // namespace dronenav
