#pragma once

#include "dronenav/planner.hpp"

namespace dronenav {

/// +1 flies start to goal (delivery), -1 flies back (return).
enum class FieldDirection : int { Delivery = 1, Return = -1 };

enum class FieldStatus { Ok, SingularHeld };

struct FieldCommand {
  Vec3 velocity = Vec3::Zero();  // m/s, mission frame
  double yaw_reference = 0.0;
  FieldStatus status = FieldStatus::Ok;
};

/// V = (alpha1^2 + alpha2^2) / 2.
double lyapunov_value(const Vec3& p, const PathParams& params);

/// G(V) = -(2/pi) atan(k_f sqrt(V)), in (-1, 0].
double convergence_gain(double lyapunov, double k_f);
/// H(V) = sqrt(1 - G^2), in [0, 1).
double tangential_gain(double convergence);

/// Unit convergent and tangential directions at p. The convergent direction
/// is zero on the curve, where it is undefined.
struct FieldComponents {
  Vec3 convergent = Vec3::Zero();
  Vec3 tangential = Vec3::Zero();
  double lyapunov = 0.0;
  Sector sector = Sector::S1;
};

/// Throws SingularGradientError at arc centres.
FieldComponents field_components(const Vec3& p, const PathParams& params, FieldDirection dir);

/// Guidance velocity v_r (G F_conv + H F_tang) with a fixed zero yaw reference.
///
/// At an arc centre the gradient has no direction; `fallback` (normally the
/// previous command) is returned with status SingularHeld instead.
FieldCommand field_velocity(const Vec3& p, const PathParams& params, FieldDirection dir,
                            const FieldCommand& fallback = {});

}  // namespace dronenav
