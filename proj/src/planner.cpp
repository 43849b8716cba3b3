#include "dronenav/planner.hpp"

#include <cmath>
#include <sstream>
#include <vector>

namespace dronenav {

namespace {

constexpr double kArcCenterEpsilon = 1e-12;

// (x, z) offset from the centre of the arc owning `sector`.
Eigen::Vector2d arc_offset(const Vec3& p, const PathParams& params, Sector sector) {
  const double cx = sector == Sector::S2 ? -params.d + params.r : -params.r;
  return {p.x() - cx, p.z() - (params.h - params.r)};
}

}  // namespace

void PathParams::validate() const {
  std::vector<std::string> problems;
  if (!(r > 0.0)) problems.push_back("r must be > 0");
  if (!(h > r)) problems.push_back("h must exceed r");
  if (!(d >= 2.0 * r)) problems.push_back("d must be >= 2r so the arcs do not overlap");
  for (std::size_t i = 0; i < speeds.size(); ++i) {
    if (!(speeds[i] > 0.0)) problems.push_back("speeds[" + std::to_string(i) + "] must be > 0");
  }
  if (!(k_f > 0.0)) problems.push_back("k_f must be > 0");
  if (!problems.empty()) {
    std::ostringstream msg;
    msg << "PathParams invalid:";
    for (const auto& p : problems) msg << ' ' << p << ';';
    throw ConfigError(msg.str());
  }
}

Sector classify_sector(const Vec3& p, const PathParams& params) {
  const double x = p.x();
  if (p.z() <= params.h - params.r) {
    return x <= -params.d / 2.0 ? Sector::S1 : Sector::S5;
  }
  if (x < -params.d + params.r) return Sector::S2;
  if (x <= -params.r) return Sector::S3;
  return Sector::S4;
}

double alpha2_in_sector(const Vec3& p, const PathParams& params, Sector sector) {
  switch (sector) {
    case Sector::S1:
      return -p.x() - params.d;
    case Sector::S3:
      return p.z() - params.h;
    case Sector::S5:
      return p.x();
    case Sector::S2:
    case Sector::S4:
      return arc_offset(p, params, sector).norm() - params.r;
  }
  return 0.0;
}

SurfaceValues surface_values(const Vec3& p, const PathParams& params) {
  const Sector sector = classify_sector(p, params);
  return {p.y(), alpha2_in_sector(p, params, sector), sector};
}

SurfaceGradients surface_gradients(const Vec3& p, const PathParams& params) {
  SurfaceGradients g;
  const Sector sector = classify_sector(p, params);
  switch (sector) {
    case Sector::S1:
      g.alpha2 = -Vec3::UnitX();
      break;
    case Sector::S3:
      g.alpha2 = Vec3::UnitZ();
      break;
    case Sector::S5:
      g.alpha2 = Vec3::UnitX();
      break;
    case Sector::S2:
    case Sector::S4: {
      const Eigen::Vector2d offset = arc_offset(p, params, sector);
      const double rho = offset.norm();
      if (rho < kArcCenterEpsilon) {
        throw SingularGradientError("surface_gradients: point is at the centre of the arc in sector " +
                                    std::to_string(index(sector)));
      }
      g.alpha2 = Vec3(offset.x() / rho, 0.0, offset.y() / rho);
      break;
    }
  }
  return g;
}

}  // namespace dronenav
