#include "dronenav/uwb.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <string>

namespace dronenav {

namespace {

constexpr int kMaxIterations = 50;
constexpr int kMaxHalvings = 40;
constexpr double kMirrorTolerance = 0.10;

Vec3 unit_or_zero(const Vec3& v) {
  const double n = v.norm();
  return n > 1e-15 ? Vec3(v / n) : Vec3::Zero();
}

Eigen::MatrixXd tdoa_jacobian(const Vec3& x, const AnchorSet& set) {
  const auto& a = set.anchors();
  const Eigen::Index n = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd j(n, 3);
  const Vec3 u1 = unit_or_zero(x - a[0]);
  j.row(0) = u1.transpose();
  for (Eigen::Index i = 1; i < n; ++i) {
    j.row(i) = (unit_or_zero(x - a[static_cast<std::size_t>(i)]) - u1).transpose();
  }
  return j;
}

// Curvature of |x - a|.
Eigen::Matrix3d range_hessian(const Vec3& x, const Vec3& a) {
  const Vec3 d = x - a;
  const double n = d.norm();
  if (n < 1e-15) return Eigen::Matrix3d::Zero();
  const Vec3 u = d / n;
  return (Eigen::Matrix3d::Identity() - u * u.transpose()) / n;
}

// Full Newton step on the half squared residual; falls back to the
// Gauss-Newton step where the Hessian is not positive definite.
Vec3 newton_step(const Vec3& x, const Eigen::VectorXd& g, const Eigen::MatrixXd& j, const AnchorSet& set,
                 const Vec3& gn_step) {
  const auto& a = set.anchors();
  const Eigen::Matrix3d h0 = range_hessian(x, a[0]);
  Eigen::Matrix3d h = j.transpose() * j + g(0) * h0;
  for (std::size_t i = 1; i < a.size(); ++i) {
    h += g(static_cast<Eigen::Index>(i)) * (range_hessian(x, a[i]) - h0);
  }
  const Eigen::LLT<Eigen::Matrix3d> llt(h);
  if (llt.info() != Eigen::Success) return gn_step;
  const Vec3 step = llt.solve(-(j.transpose() * g));
  return step.allFinite() ? step : gn_step;
}

double cost(const Vec3& x, const TdoaSample& sample, const AnchorSet& set) {
  return tdoa_residuals(x, sample, set).squaredNorm();
}

struct SolveOutcome {
  Vec3 x;
  int iterations = 0;
  std::vector<double> history;
  bool converged = false;
};

SolveOutcome gauss_newton(Vec3 x, const TdoaSample& sample, const AnchorSet& set) {
  SolveOutcome out;
  double current = cost(x, sample, set);
  out.history.push_back(current);
  for (int it = 0; it < kMaxIterations; ++it) {
    out.iterations = it + 1;
    const Eigen::VectorXd g = tdoa_residuals(x, sample, set);
    const Eigen::MatrixXd j = tdoa_jacobian(x, set);
    const Vec3 step = j.colPivHouseholderQr().solve(-g);
    if (!step.allFinite()) break;

    const double tol = 1.0 + x.norm();
    if (step.norm() < 1e-7 * tol) {
      // Below this size cost differences sit at rounding level, so the
      // line search cannot rank iterates. Take full Newton steps until they vanish.
      const Vec3 polish = newton_step(x, g, j, set, step);
      x += polish;
      if (polish.norm() < 1e-12 * tol) {
        out.converged = true;
        break;
      }
      continue;
    }

    double scale = 1.0;
    double trial = cost(x + step, sample, set);
    int halvings = 0;
    while (trial > current && halvings < kMaxHalvings) {
      scale *= 0.5;
      trial = cost(x + scale * step, sample, set);
      ++halvings;
    }
    if (trial > current) {
      // No descent along the Gauss-Newton direction: x is stationary.
      out.converged = true;
      break;
    }
    x += scale * step;
    current = trial;
    out.history.push_back(current);
    if (current < 1e-26) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged && out.iterations == kMaxIterations) {
    // Out of iterations while polishing: the position is settled to the polish threshold.
    const Eigen::VectorXd g = tdoa_residuals(x, sample, set);
    const Vec3 step = tdoa_jacobian(x, set).colPivHouseholderQr().solve(-g);
    out.converged = step.allFinite() && step.norm() < 1e-7 * (1.0 + x.norm());
  }
  out.x = x;
  return out;
}

double rms(const Vec3& x, const TdoaSample& sample, const AnchorSet& set) {
  const Eigen::VectorXd g = tdoa_residuals(x, sample, set);
  return std::sqrt(g.squaredNorm() / static_cast<double>(g.size()));
}

Vec3 reflect(const Vec3& x, const AnchorSet& set) {
  const double height = (x - set.centroid()).dot(set.plane_normal());
  return x - 2.0 * height * set.plane_normal();
}

}  // namespace

AnchorSet::AnchorSet(std::vector<Vec3> anchors, double propagation_speed, double operating_radius)
    : anchors_(std::move(anchors)), c_(propagation_speed), operating_radius_(operating_radius) {
  if (anchors_.size() < 4) {
    throw DegenerateGeometryError("AnchorSet: at least 4 anchors are required, got " +
                                  std::to_string(anchors_.size()));
  }
  if (!(c_ > 0.0) || !(operating_radius_ > 0.0)) {
    throw DegenerateGeometryError("AnchorSet: propagation speed and operating radius must be positive");
  }
  centroid_ = Vec3::Zero();
  for (const auto& a : anchors_) centroid_ += a;
  centroid_ /= static_cast<double>(anchors_.size());

  Eigen::MatrixXd centered(static_cast<Eigen::Index>(anchors_.size()), 3);
  for (std::size_t i = 0; i < anchors_.size(); ++i) {
    centered.row(static_cast<Eigen::Index>(i)) = (anchors_[i] - centroid_).transpose();
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-9 * sv(0)) {
    throw DegenerateGeometryError("AnchorSet: anchors are collinear");
  }
  coplanar_ = sv(2) <= 1e-9 * sv(0);
  normal_ = svd.matrixV().col(2);
  // Orient towards +z; for vertical planes fall back to the first non-zero component.
  double sign_ref = normal_.z();
  if (std::abs(sign_ref) < 1e-12) sign_ref = std::abs(normal_.y()) > 1e-12 ? normal_.y() : normal_.x();
  if (sign_ref < 0.0) normal_ = -normal_;
}

AnchorSet AnchorSet::translated(const Vec3& offset) const {
  std::vector<Vec3> moved = anchors_;
  for (auto& a : moved) a += offset;
  return AnchorSet(std::move(moved), c_, operating_radius_);
}

TdoaSample tdoa_from_arrival_times(const Eigen::VectorXd& arrival_times, double emission_time,
                                   double propagation_speed, double timestamp) {
  TdoaSample s;
  s.timestamp = timestamp;
  s.base_range = (arrival_times(0) - emission_time) * propagation_speed;
  s.range_differences = (arrival_times.tail(arrival_times.size() - 1).array() - arrival_times(0)) *
                        propagation_speed;
  return s;
}

std::optional<TdoaSample> tdoa_forward(const Vec3& tag, const AnchorSet& set, double timestamp) {
  const auto& a = set.anchors();
  const double base_range = (tag - a[0]).norm();
  if (base_range > set.operating_radius()) return std::nullopt;
  TdoaSample s;
  s.timestamp = timestamp;
  s.base_range = base_range;
  s.range_differences.resize(static_cast<Eigen::Index>(a.size() - 1));
  for (std::size_t i = 1; i < a.size(); ++i) {
    s.range_differences(static_cast<Eigen::Index>(i - 1)) = (tag - a[i]).norm() - base_range;
  }
  return s;
}

Eigen::VectorXd tdoa_residuals(const Vec3& x, const TdoaSample& sample, const AnchorSet& set) {
  const auto& a = set.anchors();
  Eigen::VectorXd g(static_cast<Eigen::Index>(a.size()));
  const double r1 = (x - a[0]).norm();
  g(0) = r1 - sample.base_range;
  for (std::size_t i = 1; i < a.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    g(row) = (x - a[i]).norm() - r1 - sample.range_differences(row - 1);
  }
  return g;
}

MultilaterationResult multilaterate(const TdoaSample& sample, const AnchorSet& anchors) {
  if (sample.range_differences.size() != static_cast<Eigen::Index>(anchors.size() - 1)) {
    throw std::invalid_argument("multilaterate: sample does not match the anchor count");
  }
  if (!sample.range_differences.allFinite() || !std::isfinite(sample.base_range)) {
    throw std::invalid_argument("multilaterate: non-finite sample");
  }

  // Solve relative to the anchor centroid so far-away sites lose no precision.
  const Vec3 origin = anchors.centroid();
  const AnchorSet set = anchors.translated(-origin);

  SolveOutcome best = gauss_newton(set.centroid() + set.plane_normal(), sample, set);
  if (!best.converged) {
    throw NoFixError("multilaterate: Gauss-Newton did not converge within " +
                     std::to_string(kMaxIterations) + " iterations");
  }
  double best_rms = rms(best.x, sample, set);

  // Landed below the anchor plane: try the reflected start and keep it if it
  // explains the data about as well.
  if ((best.x - set.centroid()).dot(set.plane_normal()) < 0.0) {
    SolveOutcome alt = gauss_newton(reflect(best.x, set), sample, set);
    const double alt_rms = rms(alt.x, sample, set);
    if (alt.converged && (alt.x - set.centroid()).dot(set.plane_normal()) >= 0.0 &&
        alt_rms <= (1.0 + kMirrorTolerance) * best_rms + 1e-12) {
      best = std::move(alt);
      best_rms = alt_rms;
    }
  }

  MultilaterationResult result;
  result.position = best.x + origin;
  result.residual = best_rms;
  result.iterations = best.iterations;
  result.cost_history = std::move(best.history);
  result.mirror_ambiguous =
      rms(reflect(best.x, set), sample, set) <= (1.0 + kMirrorTolerance) * best_rms + 1e-12;
  return result;
}

}  // namespace dronenav
