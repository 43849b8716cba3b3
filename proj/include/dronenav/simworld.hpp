#pragma once

#include "dronenav/ekf.hpp"
#include "dronenav/frames.hpp"
#include "dronenav/planner.hpp"
#include "dronenav/uwb.hpp"
#include "dronenav/vectorfield.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace dronenav {

/// Ground truth of the simulated vehicle in the mission frame.
struct TruthState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 euler = Vec3::Zero();
  Vec3 angular_rate = Vec3::Zero();  // body frame, over the last step
  double time = 0.0;
};

/// First-order velocity tracking in place of the vehicle's attitude controller.
struct DroneModel {
  double tau = 0.3;       // s; 0 makes the vehicle a pure integrator
  double max_tilt = 0.5;  // rad
  double gravity = 9.81;
};

/// Exact zero-order-hold response of the lag: v += (1 - exp(-dt/tau)) (cmd - v),
/// then position += v dt. Roll and pitch follow the acceleration a thrust-vectoring
/// vehicle would need; yaw tracks the reference with the same lag.
TruthState step_drone(const TruthState& truth, const FieldCommand& cmd, double dt, const DroneModel& model);

enum class Source : unsigned { Sdk = 1u, ArucoLarge = 2u, ArucoSmall = 4u, Uwb = 8u };

/// Set of enabled localisation sources. SDK pose is always part of a valid set.
class SourceSet {
 public:
  SourceSet() = default;
  static SourceSet all();
  static SourceSet sdk_only();
  /// Parses names sdk, aruco_large, aruco_small, uwb. Throws ConfigError.
  static SourceSet parse(const std::vector<std::string>& names);

  bool has(Source s) const { return (bits_ & static_cast<unsigned>(s)) != 0; }
  SourceSet with(Source s) const;
  std::vector<std::string> names() const;
  /// Names joined with '+', in canonical order.
  std::string label() const;

  bool operator==(const SourceSet&) const = default;

 private:
  unsigned bits_ = 0;
};

inline constexpr int kLargeMarkerId = 0;
inline constexpr int kSmallMarkerId = 1;

struct MarkerSpec {
  double size = 0.8;        // m, side length
  double max_range = 45.0;  // m, camera to marker centre
};

struct ArucoSensorConfig {
  MarkerSpec large{0.8, 45.0};
  MarkerSpec small{0.09, 8.0};
  double half_fov = 40.0 * 3.14159265358979323846 / 180.0;
  double position_sigma = 0.01;        // m, at zero range
  double position_sigma_per_m = 0.003; // grows with range
  double yaw_sigma = 0.02;
  double tilt_sigma = 0.1;             // roll and pitch
  double marker_yaw = 0.0;
  double rate = 10.0;
  PoseSE3 camera_in_drone = MarkerStatics::downward_camera();
};

struct UwbSensorConfig {
  std::vector<Vec3> anchors{{-2.5, -2.5, 0.0}, {2.5, -2.5, 0.0}, {2.5, 2.5, 0.0}, {-2.5, 2.5, 0.0}};
  double range_sigma = 0.05;
  double operating_radius = 10.0;
  double propagation_speed = kSpeedOfLight;
  double rate = 10.0;
};

struct SdkSensorConfig {
  double position_sigma = 0.3;
  double euler_sigma = 0.005;
  double rate = 10.0;
};

struct InputSensorConfig {
  double velocity_sigma = 0.05;
  double gyro_sigma = 0.002;
};

struct SensorSuite {
  Vec3 gps_bias = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
  SdkSensorConfig sdk;
  ArucoSensorConfig aruco;
  UwbSensorConfig uwb;
  InputSensorConfig input;
  SourceSet enabled = SourceSet::all();
  std::uint64_t rng_seed = 0;
};

/// Landing pad: nominal centre (what the planner and filter assume) and the
/// offset of where it physically is.
struct PlatformConfig {
  Vec3 center = Vec3::Zero();
  double extent = 1.0;
  Vec3 true_offset = Vec3::Zero();

  Vec3 true_center() const { return center + true_offset; }
};

/// Generates measurements from ground truth.
class SensorSimulator {
 public:
  /// Throws ConfigError when a sensor period is not a whole number of steps.
  SensorSimulator(SensorSuite suite, PlatformConfig platform, NoiseConfig noise, double dt);

  /// Velocity and gyro readings driving the filter's prediction.
  InputVector sense_input(const TruthState& truth, std::mt19937_64& rng) const;

  /// SDK pose without rate gating.
  SdkPose sdk_reading(const TruthState& truth, std::mt19937_64& rng) const;

  /// Measurements due at `step`, in the order SDK, large marker, small marker, UWB.
  std::vector<Measurement> sense(const TruthState& truth, long step, std::mt19937_64& rng) const;

  /// Filter-side constants: camera mount and the nominal marker poses.
  const MarkerStatics& statics() const { return statics_; }
  const AnchorSet& true_anchors() const { return true_anchors_; }
  const AnchorSet& nominal_anchors() const { return nominal_anchors_; }

  /// Marker pose in the camera frame when detectable, else nothing.
  std::optional<PoseSE3> observe_marker(const TruthState& truth, int marker_id) const;

 private:
  bool due(double rate, long step) const;

  SensorSuite suite_;
  PlatformConfig platform_;
  NoiseConfig noise_;
  double dt_;
  MarkerStatics statics_;
  std::vector<PoseSE3> true_markers_;
  AnchorSet true_anchors_;
  AnchorSet nominal_anchors_;
};

struct LandingThresholds {
  double horizontal = 0.15;
  double height = 0.1;
};

/// Start and goal either as Earth-local ENU points or as geodetic points.
struct MissionEndpoints {
  Vec3 start = Vec3(-100.03, 0.0, 0.0);
  Vec3 goal = Vec3::Zero();
  std::optional<GeodeticPoint> start_geodetic;
  std::optional<GeodeticPoint> goal_geodetic;
};

struct MissionConfig {
  MissionEndpoints endpoints;
  PathParams path;  // d is derived from the endpoints
  FilterConfig filter;
  SensorSuite sensors;
  double gps_bias_sigma = 1.0;
  std::optional<Vec3> gps_bias;  // overrides the random draw
  DroneModel drone;
  double dt = 0.02;
  PlatformConfig platform;
  LandingThresholds landing;
  double max_time = 900.0;
  double divergence_trace = 1e6;
  std::uint64_t seed = 1;
  std::string label = "";

  /// Throws ConfigError describing every violated invariant.
  void validate() const;
};

/// Mission-frame start point and path with d filled in.
struct ResolvedGeometry {
  InertialFrame frame;
  Vec3 start;
  PathParams path;
};

ResolvedGeometry resolve_geometry(const MissionConfig& config);

enum class MeasurementFlag : std::uint8_t { None = 0, Accepted = 1, Rejected = 2 };

struct StepRecord {
  double time = 0.0;
  Vec3 truth_position = Vec3::Zero();
  Vec3 truth_euler = Vec3::Zero();
  StateVector mean = StateVector::Zero();
  StateVector covariance_diagonal = StateVector::Zero();
  int sector = 1;
  double lyapunov = 0.0;
  Vec3 command = Vec3::Zero();
  bool xi = false;
  int direction = 1;
  MeasurementFlag sdk = MeasurementFlag::None;
  MeasurementFlag aruco_large = MeasurementFlag::None;
  MeasurementFlag aruco_small = MeasurementFlag::None;
  MeasurementFlag uwb = MeasurementFlag::None;
};

enum class MissionEvent { PlatformDetected, Landed, Released, TookOff, Finished };

const char* to_string(MissionEvent e);

struct EventRecord {
  MissionEvent event;
  double time = 0.0;
};

enum class MissionStatus { Finished, Timeout, Diverged };

const char* to_string(MissionStatus s);

struct LandingOutcome {
  double time = 0.0;
  Vec3 truth = Vec3::Zero();
  Vec3 estimate = Vec3::Zero();
  Vec3 platform_center = Vec3::Zero();  // where the pad physically is
  double distance = 0.0;                // horizontal, truth to pad centre
  double estimate_error = 0.0;          // horizontal, truth to estimate
  bool on_platform = false;
  bool ground_contact = false;          // touchdown ended the descent before the threshold test
};

struct MissionLog {
  std::vector<StepRecord> steps;
  std::vector<EventRecord> events;
  MissionStatus status = MissionStatus::Timeout;
  std::optional<LandingOutcome> landing;
  Vec3 gps_bias = Vec3::Zero();
  Vec3 final_bias_estimate = Vec3::Zero();
  std::uint64_t seed = 0;
  std::string label;
  double final_time = 0.0;
  int singular_holds = 0;
  LandingThresholds landing_thresholds;

  std::optional<double> event_time(MissionEvent e) const;
};

/// Runs the delivery leg, the release on the pad, and the return leg.
/// Deterministic for a given config (including its seed).
MissionLog run_mission(const MissionConfig& config);

}  // namespace dronenav
