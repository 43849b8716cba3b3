#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <stdexcept>
#include <string>
#include <utility>

namespace dronenav {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// WGS-84 equatorial radius, used by the equirectangular projection.
inline constexpr double kEarthRadius = 6378137.0;

/// Largest angular distance from the reference point for which the flat-earth
/// projection is accepted.
inline constexpr double kFlatEarthMaxSeparation = 0.01;

/// Thrown when an input lies outside the domain a model is valid for.
class OutOfDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Thrown when a geometric construction has no unique answer.
class DegenerateGeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GeodeticPoint {
  double latitude = 0.0;   // rad
  double longitude = 0.0;  // rad
  double altitude = 0.0;   // m
};

/// Wraps an angle to (-pi, pi].
double wrap_angle(double angle);

/// East-north-up offset of `p` from `ref` under a flat-earth model.
Vec3 geodetic_to_local(const GeodeticPoint& p, const GeodeticPoint& ref);
GeodeticPoint local_to_geodetic(const Vec3& enu, const GeodeticPoint& ref);

// Euler angles are roll, pitch, yaw applied Z-Y-X (R = Rz(yaw) Ry(pitch) Rx(roll)),
// rotating body coordinates into the parent frame.
Mat3 rotation_from_euler(const Vec3& rpy);

/// Inverse of rotation_from_euler. Near pitch = +-pi/2 roll and yaw are not
/// separable; callers that care check the pitch themselves.
Vec3 euler_from_rotation(const Mat3& rotation);

/// J(roll, pitch) with rpy_dot = J * omega_body.
Mat3 euler_rate_matrix(double roll, double pitch);

/// Rigid transform with an Euler-angle orientation contract.
struct PoseSE3 {
  Vec3 position = Vec3::Zero();
  Vec3 euler = Vec3::Zero();  // roll, pitch, yaw

  static PoseSE3 identity() { return {}; }
  static PoseSE3 from_matrix(const Mat4& h);

  Mat3 rotation() const { return rotation_from_euler(euler); }
  Mat4 matrix() const;
  Vec3 apply(const Vec3& point) const { return rotation() * point + position; }
};

/// a * b: the pose of b's frame expressed through a.
PoseSE3 compose(const PoseSE3& a, const PoseSE3& b);
PoseSE3 invert(const PoseSE3& a);

/// Homogeneous inverse computed on the matrix directly.
Mat4 invert_homogeneous(const Mat4& h);

/// Translation plus yaw taking Earth-local coordinates into the mission frame:
/// the goal sits at the origin and +x points horizontally from start to goal.
class InertialFrame {
 public:
  InertialFrame(Vec3 origin, double yaw_rotation) : origin_(std::move(origin)), yaw_(yaw_rotation) {}

  const Vec3& origin() const { return origin_; }
  double yaw_rotation() const { return yaw_; }

  Vec3 to_inertial(const Vec3& earth_local) const;
  Vec3 to_earth(const Vec3& inertial) const;

 private:
  Vec3 origin_;
  double yaw_;
};

InertialFrame make_inertial_frame(const Vec3& start, const Vec3& goal);

}  // namespace dronenav
