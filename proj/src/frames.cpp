#include "dronenav/frames.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dronenav {

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double wrapped = std::remainder(angle, two_pi);  // [-pi, pi]
  if (wrapped <= -std::numbers::pi) wrapped += two_pi;
  return wrapped;
}

Vec3 geodetic_to_local(const GeodeticPoint& p, const GeodeticPoint& ref) {
  const double dlat = p.latitude - ref.latitude;
  const double dlon = wrap_angle(p.longitude - ref.longitude);
  const double cos_ref = std::cos(ref.latitude);
  const double separation = std::hypot(dlat, dlon * cos_ref);
  if (!(separation < kFlatEarthMaxSeparation)) {
    throw OutOfDomainError("geodetic_to_local: point is " + std::to_string(separation) +
                           " rad from the reference; the flat-earth assumption holds only below " +
                           std::to_string(kFlatEarthMaxSeparation) + " rad");
  }
  return {kEarthRadius * dlon * cos_ref, kEarthRadius * dlat, p.altitude - ref.altitude};
}

GeodeticPoint local_to_geodetic(const Vec3& enu, const GeodeticPoint& ref) {
  const double cos_ref = std::cos(ref.latitude);
  if (std::abs(cos_ref) < 1e-12) {
    throw OutOfDomainError("local_to_geodetic: reference at a pole, longitude undefined");
  }
  GeodeticPoint out;
  out.latitude = ref.latitude + enu.y() / kEarthRadius;
  out.longitude = wrap_angle(ref.longitude + enu.x() / (kEarthRadius * cos_ref));
  out.altitude = ref.altitude + enu.z();
  return out;
}

Mat3 rotation_from_euler(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

Vec3 euler_from_rotation(const Mat3& r) {
  const double sin_pitch = std::clamp(-r(2, 0), -1.0, 1.0);
  return {std::atan2(r(2, 1), r(2, 2)), std::asin(sin_pitch), std::atan2(r(1, 0), r(0, 0))};
}

Mat3 euler_rate_matrix(double roll, double pitch) {
  const double sr = std::sin(roll);
  const double cr = std::cos(roll);
  const double tp = std::tan(pitch);
  const double cp = std::cos(pitch);
  Mat3 j;
  j << 1.0, sr * tp, cr * tp,
       0.0, cr, -sr,
       0.0, sr / cp, cr / cp;
  return j;
}

PoseSE3 PoseSE3::from_matrix(const Mat4& h) {
  PoseSE3 pose;
  pose.position = h.block<3, 1>(0, 3);
  pose.euler = euler_from_rotation(h.block<3, 3>(0, 0));
  return pose;
}

Mat4 PoseSE3::matrix() const {
  Mat4 h = Mat4::Identity();
  h.block<3, 3>(0, 0) = rotation();
  h.block<3, 1>(0, 3) = position;
  return h;
}

Mat4 invert_homogeneous(const Mat4& h) {
  Mat4 inv = Mat4::Identity();
  const Mat3 rt = h.block<3, 3>(0, 0).transpose();
  inv.block<3, 3>(0, 0) = rt;
  inv.block<3, 1>(0, 3) = -rt * h.block<3, 1>(0, 3);
  return inv;
}

PoseSE3 compose(const PoseSE3& a, const PoseSE3& b) {
  return PoseSE3::from_matrix(a.matrix() * b.matrix());
}

PoseSE3 invert(const PoseSE3& a) { return PoseSE3::from_matrix(invert_homogeneous(a.matrix())); }

Vec3 InertialFrame::to_inertial(const Vec3& earth_local) const {
  return Eigen::AngleAxisd(-yaw_, Vec3::UnitZ()) * (earth_local - origin_);
}

Vec3 InertialFrame::to_earth(const Vec3& inertial) const {
  return Eigen::AngleAxisd(yaw_, Vec3::UnitZ()) * inertial + origin_;
}

InertialFrame make_inertial_frame(const Vec3& start, const Vec3& goal) {
  const Eigen::Vector2d horizontal = (goal - start).head<2>();
  if (horizontal.norm() <= 0.0) {
    throw DegenerateGeometryError(
        "make_inertial_frame: start is directly above or below the goal, heading is undefined");
  }
  return InertialFrame(goal, std::atan2(horizontal.y(), horizontal.x()));
}

}  // namespace dronenav
