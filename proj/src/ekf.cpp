#include "dronenav/ekf.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <type_traits>

namespace dronenav {

namespace {

constexpr double kGimbalMargin = 1e-3;
constexpr double kJacobianStep = 1e-6;

Eigen::Vector3d diag3(double v) { return Eigen::Vector3d::Constant(v); }

Eigen::MatrixXd diagonal_covariance(const Vec3& a, const Vec3& b) {
  Eigen::VectorXd d(6);
  d << a, b;
  return d.asDiagonal();
}

void wrap_euler(StateVector& mean) {
  for (int i = 0; i < 3; ++i) {
    mean(state_index::kEuler + i) = wrap_angle(mean(state_index::kEuler + i));
  }
}

Eigen::VectorXd evaluate_model(const StateVector& mean, bool xi, const Measurement& m,
                               const MarkerStatics& statics) {
  switch (m.kind()) {
    case MeasurementKind::SdkPose: {
      Eigen::VectorXd h(6);
      h.head<3>() = mean.segment<3>(state_index::kPosition);
      if (xi) h.head<3>() += mean.segment<3>(state_index::kGpsBias);
      h.tail<3>() = mean.segment<3>(state_index::kEuler);
      return h;
    }
    case MeasurementKind::ArucoPose:
      return expected_marker_pose(mean, statics, std::get<ArucoPose>(m.data).marker_id);
    case MeasurementKind::UwbPosition:
      return mean.segment<3>(state_index::kPosition);
  }
  return {};
}

void wrap_rows(Eigen::VectorXd& v, MeasurementKind kind) {
  for (int row : angle_rows(kind)) v(row) = wrap_angle(v(row));
}

}  // namespace

NoiseConfig NoiseConfig::defaults() {
  NoiseConfig n;
  StateVector p0;
  p0 << diag3(4.0), diag3(0.01), diag3(4.0), diag3(1e-4);
  n.initial_covariance = p0.asDiagonal();
  n.input_covariance = InputMatrix::Identity() * 0.01;
  StateVector qf;
  qf << Eigen::Matrix<double, 6, 1>::Constant(1e-6), Eigen::Matrix<double, 6, 1>::Constant(1e-8);
  n.model_covariance = qf.asDiagonal();
  n.sdk_position_variance = diag3(4.0);
  n.sdk_euler_variance = diag3(1e-4);
  n.aruco_position_variance = diag3(0.01);
  n.aruco_euler_variance = Vec3(0.25, 0.25, 0.01);
  n.uwb_position_variance = diag3(0.04);
  return n;
}

Eigen::VectorXd Measurement::value() const {
  return std::visit(
      [](const auto& d) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, UwbPosition>) {
          return d.position;
        } else {
          Eigen::VectorXd v(6);
          v << d.position, d.euler;
          return v;
        }
      },
      data);
}

Measurement make_sdk_measurement(const SdkPose& pose, const NoiseConfig& noise, double timestamp) {
  return {pose, diagonal_covariance(noise.sdk_position_variance, noise.sdk_euler_variance), timestamp};
}

Measurement make_aruco_measurement(const ArucoPose& pose, const NoiseConfig& noise, double timestamp) {
  return {pose, diagonal_covariance(noise.aruco_position_variance, noise.aruco_euler_variance), timestamp};
}

Measurement make_uwb_measurement(const UwbPosition& fix, const NoiseConfig& noise, double timestamp) {
  return {fix, Eigen::MatrixXd(noise.uwb_position_variance.asDiagonal()), timestamp};
}

PoseSE3 MarkerStatics::downward_camera() {
  PoseSE3 cam;
  cam.euler = Vec3(std::numbers::pi, 0.0, 0.0);
  return cam;
}

FilterState make_initial_state(const Vec3& position, const Vec3& euler, const NoiseConfig& noise,
                               double time) {
  FilterState s;
  s.mean.segment<3>(state_index::kPosition) = position;
  s.mean.segment<3>(state_index::kEuler) = euler;
  wrap_euler(s.mean);
  s.covariance = noise.initial_covariance;
  s.time = time;
  return s;
}

StateVector propagate_mean(const StateVector& mean, const InputVector& u, double dt) {
  const double roll = mean(state_index::kEuler);
  const double pitch = mean(state_index::kEuler + 1);
  StateVector next = mean;
  next.segment<3>(state_index::kPosition) += u.velocity * dt;
  next.segment<3>(state_index::kEuler) +=
      euler_rate_matrix(roll, pitch) * (u.angular_rate - mean.segment<3>(state_index::kGyroBias)) * dt;
  return next;
}

PredictionJacobians prediction_jacobians(const StateVector& mean, const InputVector& u, double dt) {
  const double roll = mean(state_index::kEuler);
  const double pitch = mean(state_index::kEuler + 1);
  const Vec3 w = u.angular_rate - mean.segment<3>(state_index::kGyroBias);

  const double sr = std::sin(roll), cr = std::cos(roll);
  const double tp = std::tan(pitch), cp = std::cos(pitch), sp = std::sin(pitch);
  const double sec2 = 1.0 / (cp * cp);

  // Partial derivatives of J_r(roll, pitch) * w.
  const Vec3 d_roll(cr * tp * w.y() - sr * tp * w.z(),
                    -sr * w.y() - cr * w.z(),
                    (cr * w.y() - sr * w.z()) / cp);
  const Vec3 d_pitch((sr * w.y() + cr * w.z()) * sec2,
                     0.0,
                     (sr * w.y() + cr * w.z()) * sp * sec2);

  const Mat3 jr = euler_rate_matrix(roll, pitch);

  PredictionJacobians j;
  j.state = StateMatrix::Identity();
  j.state.block<3, 1>(state_index::kEuler, state_index::kEuler) += d_roll * dt;
  j.state.block<3, 1>(state_index::kEuler, state_index::kEuler + 1) += d_pitch * dt;
  j.state.block<3, 3>(state_index::kEuler, state_index::kGyroBias) = -jr * dt;

  j.input = InputJacobian::Zero();
  j.input.block<3, 3>(state_index::kPosition, 0) = Mat3::Identity() * dt;
  j.input.block<3, 3>(state_index::kEuler, 3) = jr * dt;
  return j;
}

FilterState ekf_predict(const FilterState& state, const InputVector& u, double dt, const NoiseConfig& noise) {
  if (!(dt >= 0.0)) {
    throw OutOfDomainError("ekf_predict: dt must be non-negative");
  }
  const double pitch = state.mean(state_index::kEuler + 1);
  if (std::abs(pitch) >= std::numbers::pi / 2.0 - kGimbalMargin) {
    throw OutOfDomainError("ekf_predict: estimated pitch " + std::to_string(pitch) +
                           " rad is at the Euler singularity");
  }
  if (dt == 0.0) return state;

  const PredictionJacobians j = prediction_jacobians(state.mean, u, dt);
  FilterState next = state;
  next.mean = propagate_mean(state.mean, u, dt);
  wrap_euler(next.mean);
  next.covariance = j.state * state.covariance * j.state.transpose() +
                    j.input * noise.input_covariance * j.input.transpose() + noise.model_covariance;
  next.covariance = 0.5 * (next.covariance + next.covariance.transpose()).eval();
  next.time = state.time + dt;
  return next;
}

Eigen::Matrix<double, 6, 1> expected_marker_pose(const StateVector& mean, const MarkerStatics& statics,
                                                 int marker_id) {
  if (marker_id < 0 || static_cast<std::size_t>(marker_id) >= statics.marker_in_world.size()) {
    throw std::out_of_range("expected_marker_pose: unknown marker id " + std::to_string(marker_id));
  }
  PoseSE3 drone;
  drone.position = mean.segment<3>(state_index::kPosition);
  drone.euler = mean.segment<3>(state_index::kEuler);

  const Mat4 marker_in_camera = invert_homogeneous(statics.camera_in_drone.matrix()) *
                                invert_homogeneous(drone.matrix()) *
                                statics.marker_in_world[static_cast<std::size_t>(marker_id)].matrix();
  const Mat3 rotation = marker_in_camera.block<3, 3>(0, 0);
  if (std::abs(rotation(2, 0)) >= std::sin(std::numbers::pi / 2.0 - kGimbalMargin)) {
    throw OutOfDomainError("expected_marker_pose: relative pitch is at the Euler singularity");
  }
  Eigen::Matrix<double, 6, 1> out;
  out << marker_in_camera.block<3, 1>(0, 3), euler_from_rotation(rotation);
  return out;
}

std::vector<int> angle_rows(MeasurementKind kind) {
  if (kind == MeasurementKind::UwbPosition) return {};
  return {3, 4, 5};
}

MeasurementPrediction measurement_model(const FilterState& state, const Measurement& m,
                                        const MarkerStatics& statics) {
  MeasurementPrediction out;
  out.expected = evaluate_model(state.mean, state.xi, m, statics);
  const int dim = static_cast<int>(out.expected.size());
  out.jacobian.resize(dim, kStateDim);
  for (int j = 0; j < kStateDim; ++j) {
    StateVector plus = state.mean;
    StateVector minus = state.mean;
    plus(j) += kJacobianStep;
    minus(j) -= kJacobianStep;
    Eigen::VectorXd diff = evaluate_model(plus, state.xi, m, statics) - evaluate_model(minus, state.xi, m, statics);
    wrap_rows(diff, m.kind());
    out.jacobian.col(j) = diff / (2.0 * kJacobianStep);
  }
  return out;
}

double chi_square_gate(int dof) {
  static constexpr double kQuantiles[] = {10.827566170662733, 13.815510557964274, 16.26623619623813,
                                          18.46682695290317,  20.515005652432873, 22.457744484825323};
  if (dof < 1 || dof > 6) {
    throw std::out_of_range("chi_square_gate: unsupported dimension " + std::to_string(dof));
  }
  return kQuantiles[dof - 1];
}

FilterState latch_platform_frame(const FilterState& state) {
  StateMatrix t = StateMatrix::Identity();
  t.block<3, 3>(state_index::kPosition, state_index::kGpsBias) = -Mat3::Identity();
  FilterState out = state;
  out.mean = t * state.mean;
  out.covariance = t * state.covariance * t.transpose();
  out.xi = true;
  return out;
}

CorrectionResult ekf_correct(const FilterState& state, const Measurement& m, const MarkerStatics& statics,
                             const FilterConfig& config) {
  CorrectionResult result{state, CorrectionStatus::Accepted, 0.0};
  if (m.timestamp < state.time - 1e-9) {
    result.status = CorrectionStatus::RejectedStale;
    return result;
  }
  if (m.kind() == MeasurementKind::ArucoPose && state.position().z() >= config.aruco_max_height) {
    result.status = CorrectionStatus::RejectedHeight;
    return result;
  }
  const int dim = m.dimension();
  if (m.covariance.rows() != dim || m.covariance.cols() != dim) {
    throw std::invalid_argument("ekf_correct: covariance shape does not match the measurement");
  }

  const bool local = m.kind() != MeasurementKind::SdkPose;
  const FilterState prior = (local && !state.xi) ? latch_platform_frame(state) : state;

  const MeasurementPrediction pred = measurement_model(prior, m, statics);
  Eigen::VectorXd innovation = m.value() - pred.expected;
  wrap_rows(innovation, m.kind());

  const Eigen::MatrixXd& h = pred.jacobian;
  const Eigen::MatrixXd s = h * prior.covariance * h.transpose() + m.covariance;
  const Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("ekf_correct: innovation covariance is not positive definite");
  }
  result.mahalanobis_squared = innovation.dot(llt.solve(innovation));
  if (!std::isfinite(result.mahalanobis_squared)) {
    throw NumericalError("ekf_correct: non-finite innovation");
  }
  if (result.mahalanobis_squared > chi_square_gate(dim)) {
    result.status = CorrectionStatus::RejectedGate;
    return result;
  }

  // K = P H^T S^-1, using the symmetry of S and P.
  const Eigen::MatrixXd gain = llt.solve(h * prior.covariance).transpose();
  FilterState next = prior;
  next.mean += gain * innovation;
  wrap_euler(next.mean);
  next.covariance = (StateMatrix::Identity() - gain * h) * prior.covariance;
  next.covariance = 0.5 * (next.covariance + next.covariance.transpose()).eval();
  next.time = std::max(state.time, m.timestamp);
  result.state = next;
  return result;
}

}  // namespace dronenav
