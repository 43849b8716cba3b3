#include "dronenav/vectorfield.hpp"

#include <cmath>
#include <numbers>

namespace dronenav {

namespace {
// Below this V the convergent direction is treated as undefined (on-curve).
constexpr double kOnCurveLyapunov = 1e-12;
}  // namespace

double lyapunov_value(const Vec3& p, const PathParams& params) {
  const SurfaceValues s = surface_values(p, params);
  return 0.5 * (s.alpha1 * s.alpha1 + s.alpha2 * s.alpha2);
}

double convergence_gain(double lyapunov, double k_f) {
  return -(2.0 / std::numbers::pi) * std::atan(k_f * std::sqrt(lyapunov));
}

double tangential_gain(double convergence) { return std::sqrt(1.0 - convergence * convergence); }

FieldComponents field_components(const Vec3& p, const PathParams& params, FieldDirection dir) {
  const SurfaceValues s = surface_values(p, params);
  const SurfaceGradients g = surface_gradients(p, params);

  FieldComponents out;
  out.sector = s.sector;
  out.lyapunov = 0.5 * (s.alpha1 * s.alpha1 + s.alpha2 * s.alpha2);

  const Vec3 cross = g.alpha1.cross(g.alpha2);
  out.tangential = static_cast<double>(static_cast<int>(dir)) * cross / cross.norm();

  if (out.lyapunov >= kOnCurveLyapunov) {
    const Vec3 grad_v = s.alpha1 * g.alpha1 + s.alpha2 * g.alpha2;
    out.convergent = grad_v / grad_v.norm();
  }
  return out;
}

FieldCommand field_velocity(const Vec3& p, const PathParams& params, FieldDirection dir,
                            const FieldCommand& fallback) {
  FieldComponents c;
  try {
    c = field_components(p, params, dir);
  } catch (const SingularGradientError&) {
    FieldCommand held = fallback;
    held.status = FieldStatus::SingularHeld;
    return held;
  }

  const double speed = params.speed(index(c.sector));
  FieldCommand cmd;
  if (c.lyapunov < kOnCurveLyapunov) {
    cmd.velocity = speed * c.tangential;
  } else {
    const double gain = convergence_gain(c.lyapunov, params.k_f);
    cmd.velocity = speed * (gain * c.convergent + tangential_gain(gain) * c.tangential);
  }
  cmd.yaw_reference = 0.0;
  cmd.status = FieldStatus::Ok;
  return cmd;
}

}  // namespace dronenav
