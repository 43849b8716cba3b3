#include "dronenav/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dronenav {

namespace {

double gaussian(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) return 0.0;
  std::normal_distribution<double> dist(0.0, sigma);
  return dist(rng);
}

Vec3 gaussian3(std::mt19937_64& rng, double sigma) {
  const double x = gaussian(rng, sigma);
  const double y = gaussian(rng, sigma);
  const double z = gaussian(rng, sigma);
  return {x, y, z};
}

Vec3 wrap3(const Vec3& v) { return {wrap_angle(v.x()), wrap_angle(v.y()), wrap_angle(v.z())}; }

long period_in_steps(double rate, double dt) {
  const double ratio = 1.0 / (rate * dt);
  return std::lround(ratio);
}

std::vector<Vec3> offset_points(const std::vector<Vec3>& points, const Vec3& offset) {
  std::vector<Vec3> out = points;
  for (auto& p : out) p += offset;
  return out;
}

PoseSE3 marker_pose(const Vec3& center, double yaw) {
  PoseSE3 p;
  p.position = center;
  p.euler = Vec3(0.0, 0.0, yaw);
  return p;
}

constexpr const char* kSourceNames[] = {"sdk", "aruco_large", "aruco_small", "uwb"};

}  // namespace

TruthState step_drone(const TruthState& truth, const FieldCommand& cmd, double dt, const DroneModel& model) {
  const double blend = model.tau > 0.0 ? 1.0 - std::exp(-dt / model.tau) : 1.0;
  TruthState next = truth;
  next.velocity = truth.velocity + blend * (cmd.velocity - truth.velocity);
  next.position = truth.position + next.velocity * dt;
  next.time = truth.time + dt;

  double yaw = wrap_angle(truth.euler.z() + blend * wrap_angle(cmd.yaw_reference - truth.euler.z()));
  double roll = 0.0;
  double pitch = 0.0;
  if (model.tau > 0.0) {
    const Vec3 accel = (next.velocity - truth.velocity) / dt;
    const double forward = std::cos(yaw) * accel.x() + std::sin(yaw) * accel.y();
    const double left = -std::sin(yaw) * accel.x() + std::cos(yaw) * accel.y();
    pitch = std::clamp(std::atan2(forward, model.gravity), -model.max_tilt, model.max_tilt);
    roll = std::clamp(std::atan2(-left * std::cos(pitch), model.gravity), -model.max_tilt, model.max_tilt);
  }
  next.euler = Vec3(roll, pitch, yaw);

  const Vec3 euler_rate = wrap3(next.euler - truth.euler) / dt;
  next.angular_rate = euler_rate_matrix(roll, pitch).inverse() * euler_rate;
  return next;
}

SourceSet SourceSet::all() {
  return SourceSet{}.with(Source::Sdk).with(Source::ArucoLarge).with(Source::ArucoSmall).with(Source::Uwb);
}

SourceSet SourceSet::sdk_only() { return SourceSet{}.with(Source::Sdk); }

SourceSet SourceSet::with(Source s) const {
  SourceSet out = *this;
  out.bits_ |= static_cast<unsigned>(s);
  return out;
}

SourceSet SourceSet::parse(const std::vector<std::string>& names) {
  SourceSet out;
  for (const auto& name : names) {
    bool known = false;
    for (unsigned i = 0; i < 4; ++i) {
      if (name == kSourceNames[i]) {
        out.bits_ |= 1u << i;
        known = true;
      }
    }
    if (!known) throw ConfigError("unknown localisation source '" + name + "'");
  }
  if (!out.has(Source::Sdk)) {
    throw ConfigError("source combination must include sdk, the only source available for the whole flight");
  }
  return out;
}

std::vector<std::string> SourceSet::names() const {
  std::vector<std::string> out;
  for (unsigned i = 0; i < 4; ++i) {
    if (bits_ & (1u << i)) out.emplace_back(kSourceNames[i]);
  }
  return out;
}

std::string SourceSet::label() const {
  std::string out;
  for (const auto& n : names()) {
    if (!out.empty()) out += '+';
    out += n;
  }
  return out;
}

SensorSimulator::SensorSimulator(SensorSuite suite, PlatformConfig platform, NoiseConfig noise, double dt)
    : suite_(std::move(suite)),
      platform_(std::move(platform)),
      noise_(std::move(noise)),
      dt_(dt),
      true_anchors_(offset_points(suite_.uwb.anchors, platform_.true_center()), suite_.uwb.propagation_speed,
                    suite_.uwb.operating_radius),
      nominal_anchors_(offset_points(suite_.uwb.anchors, platform_.center), suite_.uwb.propagation_speed,
                       suite_.uwb.operating_radius) {
  for (const double rate : {suite_.sdk.rate, suite_.aruco.rate, suite_.uwb.rate}) {
    const double ratio = 1.0 / (rate * dt_);
    if (!(rate > 0.0) || std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0) {
      std::ostringstream msg;
      msg << "sensor rate " << rate << " Hz does not divide the simulation rate " << 1.0 / dt_ << " Hz";
      throw ConfigError(msg.str());
    }
  }
  statics_.camera_in_drone = suite_.aruco.camera_in_drone;
  statics_.marker_in_world = {marker_pose(platform_.center, suite_.aruco.marker_yaw),
                              marker_pose(platform_.center, suite_.aruco.marker_yaw)};
  true_markers_ = {marker_pose(platform_.true_center(), suite_.aruco.marker_yaw),
                   marker_pose(platform_.true_center(), suite_.aruco.marker_yaw)};
}

bool SensorSimulator::due(double rate, long step) const { return step % period_in_steps(rate, dt_) == 0; }

InputVector SensorSimulator::sense_input(const TruthState& truth, std::mt19937_64& rng) const {
  InputVector u;
  u.velocity = truth.velocity + gaussian3(rng, suite_.input.velocity_sigma);
  u.angular_rate = truth.angular_rate + suite_.gyro_bias + gaussian3(rng, suite_.input.gyro_sigma);
  return u;
}

SdkPose SensorSimulator::sdk_reading(const TruthState& truth, std::mt19937_64& rng) const {
  SdkPose pose;
  pose.position = truth.position + suite_.gps_bias + gaussian3(rng, suite_.sdk.position_sigma);
  pose.euler = wrap3(truth.euler + gaussian3(rng, suite_.sdk.euler_sigma));
  return pose;
}

std::optional<PoseSE3> SensorSimulator::observe_marker(const TruthState& truth, int marker_id) const {
  const MarkerSpec& spec = marker_id == kLargeMarkerId ? suite_.aruco.large : suite_.aruco.small;
  PoseSE3 drone;
  drone.position = truth.position;
  drone.euler = truth.euler;
  const Mat4 world_to_camera =
      invert_homogeneous(suite_.aruco.camera_in_drone.matrix()) * invert_homogeneous(drone.matrix());
  const Mat4 marker_in_camera = world_to_camera * true_markers_[static_cast<std::size_t>(marker_id)].matrix();

  const Vec3 center = marker_in_camera.block<3, 1>(0, 3);
  if (center.norm() > spec.max_range) return std::nullopt;

  const double half = spec.size / 2.0;
  for (const auto& corner : {Vec3(half, half, 0.0), Vec3(-half, half, 0.0), Vec3(-half, -half, 0.0),
                             Vec3(half, -half, 0.0)}) {
    const Vec3 c = marker_in_camera.block<3, 3>(0, 0) * corner + center;
    if (c.z() <= 0.0) return std::nullopt;
    if (std::atan2(c.head<2>().norm(), c.z()) > suite_.aruco.half_fov) return std::nullopt;
  }
  return PoseSE3::from_matrix(marker_in_camera);
}

std::vector<Measurement> SensorSimulator::sense(const TruthState& truth, long step, std::mt19937_64& rng) const {
  std::vector<Measurement> out;
  const double t = truth.time;
  const SourceSet& enabled = suite_.enabled;

  if (enabled.has(Source::Sdk) && due(suite_.sdk.rate, step)) {
    out.push_back(make_sdk_measurement(sdk_reading(truth, rng), noise_, t));
  }

  if (due(suite_.aruco.rate, step)) {
    for (const auto& [source, id] : {std::pair{Source::ArucoLarge, kLargeMarkerId},
                                     std::pair{Source::ArucoSmall, kSmallMarkerId}}) {
      if (!enabled.has(source)) continue;
      const std::optional<PoseSE3> seen = observe_marker(truth, id);
      if (!seen) continue;
      const double range = seen->position.norm();
      const double sigma = suite_.aruco.position_sigma + suite_.aruco.position_sigma_per_m * range;
      ArucoPose pose;
      pose.marker_id = id;
      pose.position = seen->position + gaussian3(rng, sigma);
      const double roll_noise = gaussian(rng, suite_.aruco.tilt_sigma);
      const double pitch_noise = gaussian(rng, suite_.aruco.tilt_sigma);
      const double yaw_noise = gaussian(rng, suite_.aruco.yaw_sigma);
      pose.euler = wrap3(seen->euler + Vec3(roll_noise, pitch_noise, yaw_noise));
      out.push_back(make_aruco_measurement(pose, noise_, t));
    }
  }

  if (enabled.has(Source::Uwb) && due(suite_.uwb.rate, step)) {
    if (std::optional<TdoaSample> sample = tdoa_forward(truth.position, true_anchors_, t)) {
      sample->base_range += gaussian(rng, suite_.uwb.range_sigma);
      for (Eigen::Index i = 0; i < sample->range_differences.size(); ++i) {
        sample->range_differences(i) += gaussian(rng, suite_.uwb.range_sigma);
      }
      try {
        const MultilaterationResult fix = multilaterate(*sample, nominal_anchors_);
        out.push_back(make_uwb_measurement(UwbPosition{fix.position}, noise_, t));
      } catch (const NoFixError&) {
        // dropout
      }
    }
  }
  return out;
}

const char* to_string(MissionEvent e) {
  switch (e) {
    case MissionEvent::PlatformDetected: return "platform_detected";
    case MissionEvent::Landed: return "landed";
    case MissionEvent::Released: return "released";
    case MissionEvent::TookOff: return "tookoff";
    case MissionEvent::Finished: return "finished";
  }
  return "unknown";
}

const char* to_string(MissionStatus s) {
  switch (s) {
    case MissionStatus::Finished: return "finished";
    case MissionStatus::Timeout: return "timeout";
    case MissionStatus::Diverged: return "diverged";
  }
  return "unknown";
}

std::optional<double> MissionLog::event_time(MissionEvent e) const {
  for (const auto& rec : events) {
    if (rec.event == e) return rec.time;
  }
  return std::nullopt;
}

void MissionConfig::validate() const {
  std::vector<std::string> problems;
  auto check = [&problems](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };
  check(dt > 0.0 && dt <= 0.1, "mission.dt must be in (0, 0.1]");
  check(max_time > 0.0, "mission.max_time must be > 0");
  check(gps_bias_sigma >= 0.0, "sensors.gps_bias_sigma must be >= 0");
  check(drone.tau >= 0.0, "drone.tau must be >= 0");
  check(platform.extent > 0.0, "platform.extent must be > 0");
  check(landing.horizontal > 0.0 && landing.height > 0.0, "platform landing thresholds must be > 0");
  check(filter.aruco_max_height > 0.0, "ekf.aruco_max_height must be > 0");
  check(divergence_trace > 0.0, "ekf.divergence_trace must be > 0");
  const auto& s = sensors;
  check(s.sdk.position_sigma >= 0.0 && s.sdk.euler_sigma >= 0.0, "sensors.sdk sigmas must be >= 0");
  check(s.aruco.large.size > 0.0 && s.aruco.small.size > 0.0, "sensors.aruco marker sizes must be > 0");
  check(s.aruco.large.max_range > 0.0 && s.aruco.small.max_range > 0.0,
        "sensors.aruco max ranges must be > 0");
  check(s.aruco.half_fov > 0.0 && s.aruco.half_fov < 1.5707963267948966, "sensors.aruco.half_fov must be in (0, pi/2)");
  check(s.aruco.position_sigma >= 0.0 && s.aruco.position_sigma_per_m >= 0.0 && s.aruco.yaw_sigma >= 0.0 &&
            s.aruco.tilt_sigma >= 0.0,
        "sensors.aruco sigmas must be >= 0");
  check(s.uwb.range_sigma >= 0.0, "sensors.uwb.range_sigma must be >= 0");
  check(s.uwb.operating_radius > 0.0, "sensors.uwb.operating_radius must be > 0");
  check(s.uwb.anchors.size() >= 4, "sensors.uwb.anchors needs at least 4 anchors");
  check(s.input.velocity_sigma >= 0.0 && s.input.gyro_sigma >= 0.0, "sensors.input sigmas must be >= 0");
  check(s.enabled.has(Source::Sdk), "sensors.enabled must include sdk");
  if (!problems.empty()) {
    std::ostringstream msg;
    msg << "MissionConfig invalid:";
    for (const auto& p : problems) msg << ' ' << p << ';';
    throw ConfigError(msg.str());
  }
  resolve_geometry(*this).path.validate();
}

ResolvedGeometry resolve_geometry(const MissionConfig& config) {
  Vec3 start = config.endpoints.start;
  Vec3 goal = config.endpoints.goal;
  if (config.endpoints.start_geodetic && config.endpoints.goal_geodetic) {
    start = geodetic_to_local(*config.endpoints.start_geodetic, *config.endpoints.goal_geodetic);
    goal = Vec3::Zero();
  }
  InertialFrame frame = [&] {
    try {
      return make_inertial_frame(start, goal);
    } catch (const DegenerateGeometryError& e) {
      throw ConfigError(std::string("PathParams invalid: ") + e.what());
    }
  }();
  const Vec3 start_inertial = frame.to_inertial(start);
  PathParams path = config.path;
  path.d = -start_inertial.x();
  return {frame, start_inertial, path};
}

MissionLog run_mission(const MissionConfig& config) {
  config.validate();
  const ResolvedGeometry geo = resolve_geometry(config);
  std::mt19937_64 rng(config.seed);

  MissionLog log;
  log.seed = config.seed;
  log.label = config.label;
  log.landing_thresholds = config.landing;

  SensorSuite suite = config.sensors;
  if (config.gps_bias) {
    suite.gps_bias = *config.gps_bias;
  } else {
    suite.gps_bias = gaussian3(rng, config.gps_bias_sigma);
  }
  log.gps_bias = suite.gps_bias;

  const SensorSimulator sim(suite, config.platform, config.filter.noise, config.dt);

  TruthState truth;
  truth.position = geo.start;

  const SdkPose first = sim.sdk_reading(truth, rng);
  FilterState filter = make_initial_state(first.position, first.euler, config.filter.noise);

  FieldDirection direction = FieldDirection::Delivery;
  Vec3 target = config.platform.center;
  FieldCommand last_command;
  int ground_steps = 0;  // ticks spent on the pad between landing and take-off
  long step = 0;

  auto record_event = [&log](MissionEvent e, double t) { log.events.push_back({e, t}); };

  while (true) {
    const double t = static_cast<double>(step + 1) * config.dt;
    if (t > config.max_time + 1e-9) {
      log.status = MissionStatus::Timeout;
      break;
    }

    StepRecord rec;
    const Vec3 estimate = filter.position();
    rec.sector = index(classify_sector(estimate, geo.path));
    rec.lyapunov = lyapunov_value(estimate, geo.path);
    rec.direction = static_cast<int>(direction);

    FieldCommand cmd;
    if (ground_steps > 0) {
      cmd.velocity = Vec3::Zero();
    } else {
      cmd = field_velocity(estimate, geo.path, direction, last_command);
      if (cmd.status == FieldStatus::SingularHeld) ++log.singular_holds;
      last_command = cmd;
    }
    rec.command = cmd.velocity;

    const bool descending_before = truth.velocity.z() < 0.0 || cmd.velocity.z() < 0.0;
    truth = step_drone(truth, cmd, config.dt, config.drone);
    truth.time = t;
    bool contact = false;
    if (ground_steps == 0 && descending_before && truth.position.z() <= target.z()) {
      truth.position.z() = target.z();
      truth.velocity.z() = 0.0;
      contact = true;
    }

    const InputVector u = sim.sense_input(truth, rng);
    filter = ekf_predict(filter, u, config.dt, config.filter.noise);
    filter.time = t;
    ++step;

    for (const Measurement& m : sim.sense(truth, step, rng)) {
      const bool had_xi = filter.xi;
      const CorrectionResult res = ekf_correct(filter, m, sim.statics(), config.filter);
      const MeasurementFlag flag =
          res.status == CorrectionStatus::Accepted ? MeasurementFlag::Accepted : MeasurementFlag::Rejected;
      switch (m.kind()) {
        case MeasurementKind::SdkPose: rec.sdk = flag; break;
        case MeasurementKind::UwbPosition: rec.uwb = flag; break;
        case MeasurementKind::ArucoPose:
          (std::get<ArucoPose>(m.data).marker_id == kLargeMarkerId ? rec.aruco_large : rec.aruco_small) = flag;
          break;
      }
      filter = res.state;
      if (!had_xi && filter.xi) record_event(MissionEvent::PlatformDetected, t);
    }

    rec.time = t;
    rec.truth_position = truth.position;
    rec.truth_euler = truth.euler;
    rec.mean = filter.mean;
    rec.covariance_diagonal = filter.covariance.diagonal();
    rec.xi = filter.xi;
    log.steps.push_back(rec);
    log.final_time = t;

    if (!filter.mean.allFinite() || !filter.covariance.allFinite() ||
        filter.covariance.trace() > config.divergence_trace) {
      log.status = MissionStatus::Diverged;
      break;
    }

    if (ground_steps > 0) {
      // Release on the tick after touchdown, take off on the next one.
      if (ground_steps == 1) {
        record_event(MissionEvent::Released, t);
        ground_steps = 2;
      } else {
        record_event(MissionEvent::TookOff, t);
        ground_steps = 0;
        direction = FieldDirection::Return;
        target = geo.start;
      }
      continue;
    }

    const Vec3 est = filter.position();
    const bool arrived = (est - target).head<2>().norm() < config.landing.horizontal &&
                         est.z() - target.z() < config.landing.height;
    if (!(arrived || contact)) continue;

    if (direction == FieldDirection::Delivery) {
      LandingOutcome out;
      out.time = t;
      out.truth = truth.position;
      out.estimate = est;
      out.platform_center = config.platform.true_center();
      const Eigen::Vector2d miss = (truth.position - out.platform_center).head<2>();
      out.distance = miss.norm();
      out.estimate_error = (truth.position - est).head<2>().norm();
      out.on_platform = std::abs(miss.x()) <= config.platform.extent / 2.0 &&
                        std::abs(miss.y()) <= config.platform.extent / 2.0;
      out.ground_contact = contact && !arrived;
      log.landing = out;
      record_event(MissionEvent::Landed, t);
      truth.velocity = Vec3::Zero();
      ground_steps = 1;
    } else {
      record_event(MissionEvent::Finished, t);
      log.status = MissionStatus::Finished;
      break;
    }
  }

  log.final_bias_estimate = filter.gps_bias();
  return log;
}

}  // namespace dronenav
