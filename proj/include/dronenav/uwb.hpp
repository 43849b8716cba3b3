#pragma once

#include "dronenav/frames.hpp"

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <vector>

namespace dronenav {

inline constexpr double kSpeedOfLight = 299792458.0;

class NoFixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fixed anchors; index 0 here is the base anchor.
class AnchorSet {
 public:
  /// Throws DegenerateGeometryError for fewer than 4 anchors or a collinear layout.
  explicit AnchorSet(std::vector<Vec3> anchors, double propagation_speed = kSpeedOfLight,
                     double operating_radius = 10.0);

  const std::vector<Vec3>& anchors() const { return anchors_; }
  const Vec3& base() const { return anchors_.front(); }
  std::size_t size() const { return anchors_.size(); }
  double propagation_speed() const { return c_; }
  double operating_radius() const { return operating_radius_; }

  /// Best-fit plane through the anchors, normal oriented towards +z.
  const Vec3& centroid() const { return centroid_; }
  const Vec3& plane_normal() const { return normal_; }
  bool coplanar() const { return coplanar_; }

  AnchorSet translated(const Vec3& offset) const;

 private:
  std::vector<Vec3> anchors_;
  double c_;
  double operating_radius_;
  Vec3 centroid_;
  Vec3 normal_;
  bool coplanar_ = false;
};

struct TdoaSample {
  Eigen::VectorXd range_differences;  // d_i1 for anchors 2..N
  double base_range = 0.0;            // d_1, tag to base anchor
  double timestamp = 0.0;
};

/// Range differences from arrival times: d_i1 = (t_i - t_1) c and d_1 = (t_1 - t_0) c.
TdoaSample tdoa_from_arrival_times(const Eigen::VectorXd& arrival_times, double emission_time,
                                   double propagation_speed, double timestamp = 0.0);

/// Noise-free sample for a tag, or nothing when the tag is outside the
/// operating radius of the base anchor.
std::optional<TdoaSample> tdoa_forward(const Vec3& tag, const AnchorSet& set, double timestamp = 0.0);

struct MultilaterationResult {
  Vec3 position = Vec3::Zero();
  double residual = 0.0;            // RMS of the final equation errors, m
  bool mirror_ambiguous = false;    // the reflection through the anchor plane fits within 10 %
  int iterations = 0;
  std::vector<double> cost_history;  // sum of squared errors per accepted iterate
};

/// Gauss-Newton solve of the range-difference equations plus the base range,
/// preferring the solution above the anchor plane. Throws NoFixError when the
/// iteration does not settle within 50 steps.
MultilaterationResult multilaterate(const TdoaSample& sample, const AnchorSet& set);

/// Equation errors g(x) used by the solver.
Eigen::VectorXd tdoa_residuals(const Vec3& x, const TdoaSample& sample, const AnchorSet& set);

}  // namespace dronenav
