#pragma once

#include "dronenav/frames.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace dronenav {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown where a surface gradient has no direction (arc centres).
class SingularGradientError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Geometry and speeds of the five-section delivery path.
///
/// In the mission frame the path climbs vertically from (-d, 0, 0), bends
/// through a quarter arc of radius r into a horizontal cruise at height h,
/// bends down through a second arc and descends vertically onto the origin.
struct PathParams {
  double h = 45.0;
  double r = 6.0;
  double d = 100.03;
  std::array<double, 5> speeds{2.0, 2.0, 5.0, 2.0, 1.0};
  double k_f = 1.0;

  /// Throws ConfigError naming PathParams when an invariant is violated.
  void validate() const;
  double speed(int sector) const { return speeds[static_cast<std::size_t>(sector - 1)]; }
};

enum class Sector : int { S1 = 1, S2 = 2, S3 = 3, S4 = 4, S5 = 5 };

inline int index(Sector s) { return static_cast<int>(s); }

Sector classify_sector(const Vec3& p, const PathParams& params);

struct SurfaceValues {
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  Sector sector = Sector::S1;
};

/// alpha1 = y; alpha2 is the sector-wise distance-like surface. Both vanish
/// exactly on the planned curve.
SurfaceValues surface_values(const Vec3& p, const PathParams& params);

/// alpha2 evaluated with a given sector's formula regardless of where p lies.
double alpha2_in_sector(const Vec3& p, const PathParams& params, Sector sector);

struct SurfaceGradients {
  Vec3 alpha1 = Vec3::UnitY();
  Vec3 alpha2 = Vec3::Zero();
};

/// Throws SingularGradientError at the centre of either arc.
SurfaceGradients surface_gradients(const Vec3& p, const PathParams& params);

}  // namespace dronenav
