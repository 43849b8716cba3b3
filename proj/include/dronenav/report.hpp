#pragma once

#include "dronenav/frames.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dronenav {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The subset of outcome.json that aggregation needs.
struct OutcomeRecord {
  int mission_index = 0;
  std::string label;
  std::uint64_t seed = 0;
  std::string status;
  bool landed = false;
  Vec3 truth = Vec3::Zero();
  Vec3 estimate = Vec3::Zero();
  Vec3 platform_center = Vec3::Zero();
  double distance = 0.0;
  double estimate_error = 0.0;
  bool on_platform = false;
  Vec3 gps_bias = Vec3::Zero();
  Vec3 bias_estimate = Vec3::Zero();
};

/// Throws ReportError on missing or mistyped fields.
OutcomeRecord outcome_from_json(const nlohmann::json& j);

/// 2-standard-deviation ellipse of horizontal landing points.
struct ScatterEllipse {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  // sample covariance, n - 1
  double semi_major = 0.0;
  double semi_minor = 0.0;
  double angle = 0.0;  // rad, major axis from +x
};

std::optional<ScatterEllipse> scatter_ellipse(const std::vector<Eigen::Vector2d>& points);

/// Groups records by label (in order of first mission index) and computes
/// landing statistics per group plus one row per mission.
nlohmann::json summarize(std::vector<OutcomeRecord> records);

/// Plot-ready landing rows, sorted by mission index.
std::string landing_scatter_csv(std::vector<OutcomeRecord> records);

/// Every outcome.json below `dir`. Throws ReportError when none is found or one is corrupt.
std::vector<OutcomeRecord> load_outcomes(const std::filesystem::path& dir);

}  // namespace dronenav
