#pragma once

#include "dronenav/frames.hpp"

#include <Eigen/Core>

#include <stdexcept>
#include <variant>
#include <vector>

namespace dronenav {

inline constexpr int kStateDim = 12;
inline constexpr int kInputDim = 6;

using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using StateMatrix = Eigen::Matrix<double, kStateDim, kStateDim>;
using InputMatrix = Eigen::Matrix<double, kInputDim, kInputDim>;
using InputJacobian = Eigen::Matrix<double, kStateDim, kInputDim>;

/// Offsets of each block inside the state vector.
namespace state_index {
inline constexpr int kPosition = 0;
inline constexpr int kEuler = 3;
inline constexpr int kGpsBias = 6;
inline constexpr int kGyroBias = 9;
}  // namespace state_index

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean [position, roll/pitch/yaw, GPS position bias, gyro bias], covariance,
/// and the latch recording whether platform-local data has been fused yet.
struct FilterState {
  StateVector mean = StateVector::Zero();
  StateMatrix covariance = StateMatrix::Identity();
  bool xi = false;
  double time = 0.0;

  Vec3 position() const { return mean.segment<3>(state_index::kPosition); }
  Vec3 euler() const { return mean.segment<3>(state_index::kEuler); }
  Vec3 gps_bias() const { return mean.segment<3>(state_index::kGpsBias); }
  Vec3 gyro_bias() const { return mean.segment<3>(state_index::kGyroBias); }
};

/// Linear velocity in the world frame and angular rate in the body frame.
struct InputVector {
  Vec3 velocity = Vec3::Zero();
  Vec3 angular_rate = Vec3::Zero();
};

struct NoiseConfig {
  StateMatrix initial_covariance;
  InputMatrix input_covariance;   // Q_u
  StateMatrix model_covariance;   // Q_f, added once per prediction
  Vec3 sdk_position_variance;
  Vec3 sdk_euler_variance;
  Vec3 aruco_position_variance;
  Vec3 aruco_euler_variance;      // roll, pitch, yaw
  Vec3 uwb_position_variance;

  static NoiseConfig defaults();
};

enum class MeasurementKind { SdkPose, ArucoPose, UwbPosition };

struct SdkPose {
  Vec3 position = Vec3::Zero();
  Vec3 euler = Vec3::Zero();
};

/// Pose of a marker expressed in the camera frame, as a PnP solve reports it.
struct ArucoPose {
  Vec3 position = Vec3::Zero();
  Vec3 euler = Vec3::Zero();
  int marker_id = 0;
};

struct UwbPosition {
  Vec3 position = Vec3::Zero();
};

struct Measurement {
  std::variant<SdkPose, ArucoPose, UwbPosition> data;
  Eigen::MatrixXd covariance;
  double timestamp = 0.0;

  MeasurementKind kind() const { return static_cast<MeasurementKind>(data.index()); }
  int dimension() const { return kind() == MeasurementKind::UwbPosition ? 3 : 6; }
  Eigen::VectorXd value() const;
};

Measurement make_sdk_measurement(const SdkPose& pose, const NoiseConfig& noise, double timestamp);
Measurement make_aruco_measurement(const ArucoPose& pose, const NoiseConfig& noise, double timestamp);
Measurement make_uwb_measurement(const UwbPosition& fix, const NoiseConfig& noise, double timestamp);

/// Constant transforms used by the marker measurement model.
struct MarkerStatics {
  PoseSE3 camera_in_drone;
  std::vector<PoseSE3> marker_in_world;  // indexed by marker id

  /// Camera looking straight down (optical axis along body -z), no offset.
  static PoseSE3 downward_camera();
};

struct FilterConfig {
  NoiseConfig noise = NoiseConfig::defaults();
  double aruco_max_height = 30.0;
};

FilterState make_initial_state(const Vec3& position, const Vec3& euler, const NoiseConfig& noise,
                               double time = 0.0);

/// Process model without angle wrapping (used for Jacobian checks).
StateVector propagate_mean(const StateVector& mean, const InputVector& u, double dt);

struct PredictionJacobians {
  StateMatrix state;    // df/dx
  InputJacobian input;  // df/du
};

PredictionJacobians prediction_jacobians(const StateVector& mean, const InputVector& u, double dt);

/// Throws OutOfDomainError for dt < 0 or pitch near +-pi/2.
FilterState ekf_predict(const FilterState& state, const InputVector& u, double dt,
                        const NoiseConfig& noise);

struct MeasurementPrediction {
  Eigen::VectorXd expected;
  Eigen::MatrixXd jacobian;  // dim x 12
};

/// Expected pose of marker `marker_id` in the camera frame for the given state.
Eigen::Matrix<double, 6, 1> expected_marker_pose(const StateVector& mean, const MarkerStatics& statics,
                                                 int marker_id);

/// h(x) and its Jacobian for the measurement's variant. Jacobians are central
/// differences with step 1e-6 and wrapped angle differences.
MeasurementPrediction measurement_model(const FilterState& state, const Measurement& m,
                                        const MarkerStatics& statics);

/// Angle rows of a measurement of this kind (wrapped in residuals).
std::vector<int> angle_rows(MeasurementKind kind);

/// 99.9 % chi-square quantile for 1..6 degrees of freedom.
double chi_square_gate(int dof);

enum class CorrectionStatus { Accepted, RejectedGate, RejectedHeight, RejectedStale };

struct CorrectionResult {
  FilterState state;
  CorrectionStatus status = CorrectionStatus::Accepted;
  double mahalanobis_squared = 0.0;
};

/// Applies the platform-latch change of variables: position becomes
/// position - gps_bias and xi is set. Mean is unchanged while the bias mean is 0.
FilterState latch_platform_frame(const FilterState& state);

/// Kalman correction with chi-square gating. The first accepted marker or UWB
/// correction latches xi. Rejections return the input state untouched.
CorrectionResult ekf_correct(const FilterState& state, const Measurement& m, const MarkerStatics& statics,
                             const FilterConfig& config);

}  // namespace dronenav
