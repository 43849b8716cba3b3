#include "dronenav/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace dronenav {

namespace {

using nlohmann::json;

/// Typed view of one JSON object that records every key it was asked for,
/// so leftovers can be reported as unknown.
class Section {
 public:
  Section(const json* node, std::string path, std::vector<std::string>& errors)
      : node_(node), path_(std::move(path)), errors_(errors) {
    if (node_ != nullptr && !node_->is_object()) {
      fail("", "expected an object");
      node_ = nullptr;
    }
  }

  Section child(const std::string& key) {
    known_.insert(key);
    return Section(find(key), qualified(key), errors_);
  }

  bool has(const std::string& key) const { return find(key) != nullptr; }

  double number(const std::string& key, double fallback) {
    known_.insert(key);
    const json* v = find(key);
    if (v == nullptr) return fallback;
    if (!v->is_number()) {
      fail(key, "expected a number");
      return fallback;
    }
    return v->get<double>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    known_.insert(key);
    const json* v = find(key);
    if (v == nullptr) return fallback;
    if (!v->is_number_unsigned()) {
      fail(key, "expected a non-negative integer");
      return fallback;
    }
    return v->get<std::uint64_t>();
  }

  std::vector<double> numbers(const std::string& key, std::size_t count, const std::vector<double>& fallback) {
    known_.insert(key);
    const json* v = find(key);
    if (v == nullptr) return fallback;
    if (!v->is_array() || v->size() != count) {
      fail(key, "expected " + std::to_string(count) + " numbers, got " +
                    (v->is_array() ? std::to_string(v->size()) : std::string("a ") + v->type_name()));
      return fallback;
    }
    std::vector<double> out;
    for (const auto& e : *v) {
      if (!e.is_number()) {
        fail(key, "expected only numbers");
        return fallback;
      }
      out.push_back(e.get<double>());
    }
    return out;
  }

  Vec3 vec3(const std::string& key, const Vec3& fallback) {
    const auto v = numbers(key, 3, {fallback.x(), fallback.y(), fallback.z()});
    return {v[0], v[1], v[2]};
  }

  std::optional<Vec3> optional_vec3(const std::string& key) {
    if (!has(key)) {
      known_.insert(key);
      return std::nullopt;
    }
    return vec3(key, Vec3::Zero());
  }

  std::vector<Vec3> vec3_list(const std::string& key, const std::vector<Vec3>& fallback) {
    known_.insert(key);
    const json* v = find(key);
    if (v == nullptr) return fallback;
    if (!v->is_array()) {
      fail(key, "expected a list of 3-vectors");
      return fallback;
    }
    std::vector<Vec3> out;
    for (const auto& e : *v) {
      if (!e.is_array() || e.size() != 3 || !e[0].is_number() || !e[1].is_number() || !e[2].is_number()) {
        fail(key, "expected a list of 3-vectors");
        return fallback;
      }
      out.emplace_back(e[0].get<double>(), e[1].get<double>(), e[2].get<double>());
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& key, const std::vector<std::string>& fallback) {
    known_.insert(key);
    const json* v = find(key);
    if (v == nullptr) return fallback;
    std::vector<std::string> out;
    if (v->is_array()) {
      for (const auto& e : *v) {
        if (!e.is_string()) {
          fail(key, "expected a list of strings");
          return fallback;
        }
        out.push_back(e.get<std::string>());
      }
      return out;
    }
    fail(key, "expected a list of strings");
    return fallback;
  }

  const json* raw(const std::string& key) {
    known_.insert(key);
    return find(key);
  }

  /// Reports keys nobody asked for.
  void finish() const {
    if (node_ == nullptr) return;
    for (const auto& [key, value] : node_->items()) {
      if (!known_.contains(key)) errors_.push_back(qualified(key) + ": unknown key");
    }
  }

  void fail(const std::string& key, const std::string& message) const {
    errors_.push_back((key.empty() ? path_ : qualified(key)) + ": " + message);
  }

 private:
  const json* find(const std::string& key) const {
    if (node_ == nullptr) return nullptr;
    const auto it = node_->find(key);
    return it == node_->end() ? nullptr : &*it;
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* node_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> known_;
};

template <int N>
Eigen::Matrix<double, N, N> diag_from(const std::vector<double>& v) {
  Eigen::Matrix<double, N, 1> d;
  for (int i = 0; i < N; ++i) d(i) = v[static_cast<std::size_t>(i)];
  return d.asDiagonal();
}

template <int N>
std::vector<double> diag_of(const Eigen::Matrix<double, N, N>& m) {
  std::vector<double> out;
  for (int i = 0; i < N; ++i) out.push_back(m(i, i));
  return out;
}

std::optional<GeodeticPoint> read_geodetic(Section& parent, const std::string& key) {
  if (!parent.has(key)) {
    parent.raw(key);
    return std::nullopt;
  }
  Section s = parent.child(key);
  GeodeticPoint g;
  g.latitude = s.number("latitude", 0.0);
  g.longitude = s.number("longitude", 0.0);
  g.altitude = s.number("altitude", 0.0);
  s.finish();
  return g;
}

[[noreturn]] void throw_errors(const std::vector<std::string>& errors) {
  std::ostringstream msg;
  msg << "invalid configuration (" << errors.size() << " problem" << (errors.size() == 1 ? "" : "s") << "):";
  for (const auto& e : errors) msg << "\n  " << e;
  throw ConfigError(msg.str());
}

void parse_ekf(Section s, MissionConfig& c) {
  NoiseConfig& n = c.filter.noise;
  n.initial_covariance = diag_from<12>(s.numbers("initial_covariance_diag", 12, diag_of<12>(n.initial_covariance)));
  n.input_covariance = diag_from<6>(s.numbers("input_covariance_diag", 6, diag_of<6>(n.input_covariance)));
  n.model_covariance = diag_from<12>(s.numbers("model_covariance_diag", 12, diag_of<12>(n.model_covariance)));
  n.sdk_position_variance = s.vec3("sdk_position_variance", n.sdk_position_variance);
  n.sdk_euler_variance = s.vec3("sdk_euler_variance", n.sdk_euler_variance);
  n.aruco_position_variance = s.vec3("aruco_position_variance", n.aruco_position_variance);
  n.aruco_euler_variance = s.vec3("aruco_euler_variance", n.aruco_euler_variance);
  n.uwb_position_variance = s.vec3("uwb_position_variance", n.uwb_position_variance);
  c.filter.aruco_max_height = s.number("aruco_max_height", c.filter.aruco_max_height);
  c.divergence_trace = s.number("divergence_trace", c.divergence_trace);
  s.finish();
}

void parse_sensors(Section s, MissionConfig& c) {
  SensorSuite& suite = c.sensors;
  if (s.has("enabled")) {
    try {
      suite.enabled = SourceSet::parse(s.strings("enabled", {}));
    } catch (const ConfigError& e) {
      s.fail("enabled", e.what());
    }
  } else {
    s.raw("enabled");
  }
  c.gps_bias_sigma = s.number("gps_bias_sigma", c.gps_bias_sigma);
  c.gps_bias = s.optional_vec3("gps_bias");
  suite.gyro_bias = s.vec3("gyro_bias", suite.gyro_bias);

  Section sdk = s.child("sdk");
  suite.sdk.position_sigma = sdk.number("position_sigma", suite.sdk.position_sigma);
  suite.sdk.euler_sigma = sdk.number("euler_sigma", suite.sdk.euler_sigma);
  suite.sdk.rate = sdk.number("rate", suite.sdk.rate);
  sdk.finish();

  Section aruco = s.child("aruco");
  auto& a = suite.aruco;
  a.large.size = aruco.number("large_size", a.large.size);
  a.large.max_range = aruco.number("large_max_range", a.large.max_range);
  a.small.size = aruco.number("small_size", a.small.size);
  a.small.max_range = aruco.number("small_max_range", a.small.max_range);
  a.half_fov = aruco.number("half_fov", a.half_fov);
  a.position_sigma = aruco.number("position_sigma", a.position_sigma);
  a.position_sigma_per_m = aruco.number("position_sigma_per_m", a.position_sigma_per_m);
  a.yaw_sigma = aruco.number("yaw_sigma", a.yaw_sigma);
  a.tilt_sigma = aruco.number("tilt_sigma", a.tilt_sigma);
  a.marker_yaw = aruco.number("marker_yaw", a.marker_yaw);
  a.rate = aruco.number("rate", a.rate);
  a.camera_in_drone.position = aruco.vec3("camera_position", a.camera_in_drone.position);
  a.camera_in_drone.euler = aruco.vec3("camera_euler", a.camera_in_drone.euler);
  aruco.finish();

  Section uwb = s.child("uwb");
  suite.uwb.anchors = uwb.vec3_list("anchors", suite.uwb.anchors);
  suite.uwb.range_sigma = uwb.number("range_sigma", suite.uwb.range_sigma);
  suite.uwb.operating_radius = uwb.number("operating_radius", suite.uwb.operating_radius);
  suite.uwb.propagation_speed = uwb.number("propagation_speed", suite.uwb.propagation_speed);
  suite.uwb.rate = uwb.number("rate", suite.uwb.rate);
  uwb.finish();

  Section input = s.child("input");
  suite.input.velocity_sigma = input.number("velocity_sigma", suite.input.velocity_sigma);
  suite.input.gyro_sigma = input.number("gyro_sigma", suite.input.gyro_sigma);
  input.finish();

  s.finish();
}

}  // namespace

MissionConfig mission_config_from_json(const json& doc) {
  std::vector<std::string> errors;
  Section root(&doc, "", errors);
  MissionConfig c;

  Section mission = root.child("mission");
  c.seed = mission.unsigned_integer("seed", c.seed);
  c.dt = mission.number("dt", c.dt);
  c.max_time = mission.number("max_time", c.max_time);
  if (const json* label = mission.raw("label")) {
    if (label->is_string()) {
      c.label = label->get<std::string>();
    } else {
      mission.fail("label", "expected a string");
    }
  }
  c.endpoints.start = mission.vec3("start", c.endpoints.start);
  c.endpoints.goal = mission.vec3("goal", c.endpoints.goal);
  c.endpoints.start_geodetic = read_geodetic(mission, "start_geodetic");
  c.endpoints.goal_geodetic = read_geodetic(mission, "goal_geodetic");
  if (c.endpoints.start_geodetic.has_value() != c.endpoints.goal_geodetic.has_value()) {
    mission.fail("start_geodetic", "start_geodetic and goal_geodetic must be given together");
  }
  mission.finish();

  Section path = root.child("path");
  c.path.h = path.number("h", c.path.h);
  c.path.r = path.number("r", c.path.r);
  const auto speeds = path.numbers("speeds", 5, {c.path.speeds.begin(), c.path.speeds.end()});
  std::copy(speeds.begin(), speeds.end(), c.path.speeds.begin());
  path.finish();

  Section field = root.child("field");
  c.path.k_f = field.number("k_f", c.path.k_f);
  field.finish();

  Section drone = root.child("drone");
  c.drone.tau = drone.number("tau", c.drone.tau);
  c.drone.max_tilt = drone.number("max_tilt", c.drone.max_tilt);
  drone.finish();

  parse_ekf(root.child("ekf"), c);
  parse_sensors(root.child("sensors"), c);

  Section platform = root.child("platform");
  c.platform.center = platform.vec3("center", c.platform.center);
  c.platform.extent = platform.number("extent", c.platform.extent);
  c.platform.true_offset = platform.vec3("true_offset", c.platform.true_offset);
  c.landing.horizontal = platform.number("landing_horizontal", c.landing.horizontal);
  c.landing.height = platform.number("landing_height", c.landing.height);
  platform.finish();

  root.raw("batch");  // consumed by batch_spec_from_json
  root.finish();

  if (errors.empty()) {
    try {
      c.validate();
    } catch (const ConfigError& e) {
      errors.emplace_back(e.what());
    } catch (const std::exception& e) {
      errors.emplace_back(std::string("geometry: ") + e.what());
    }
  }
  if (!errors.empty()) throw_errors(errors);
  return c;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file " + path.string());
  try {
    return json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

MissionConfig load_mission_config(const std::filesystem::path& path) {
  return mission_config_from_json(read_json_file(path));
}

BatchSpec batch_spec_from_json(const json& doc) {
  BatchSpec spec;
  spec.base_document = doc;
  spec.base = mission_config_from_json(doc);

  std::vector<std::string> errors;
  Section root(&doc, "", errors);
  Section batch = root.child("batch");
  if (!root.has("batch")) batch.fail("", "missing section");

  const json* trials = batch.raw("trials");
  if (trials == nullptr || !trials->is_number_integer() || trials->get<long long>() < 1) {
    batch.fail("trials", "expected an integer >= 1");
  } else {
    spec.trials = trials->get<int>();
  }
  spec.root_seed = batch.unsigned_integer("root_seed", spec.base.seed);

  const json* combos = batch.raw("combinations");
  if (combos == nullptr) {
    spec.combinations = {spec.base.sensors.enabled};
  } else if (!combos->is_array() || combos->empty()) {
    batch.fail("combinations", "expected a non-empty list of source lists");
  } else {
    for (const auto& entry : *combos) {
      try {
        spec.combinations.push_back(SourceSet::parse(entry.get<std::vector<std::string>>()));
      } catch (const ConfigError& e) {
        batch.fail("combinations", e.what());
      } catch (const json::exception&) {
        batch.fail("combinations", "each combination must be a list of source names");
      }
    }
  }

  if (batch.has("sweep")) {
    Section sweep = batch.child("sweep");
    ParameterSweep ps;
    const json* param = sweep.raw("parameter");
    const json* values = sweep.raw("values");
    if (param == nullptr || !param->is_string()) sweep.fail("parameter", "expected a dotted key such as field.k_f");
    if (values == nullptr || !values->is_array() || values->empty()) sweep.fail("values", "expected a non-empty list");
    sweep.finish();
    if (param != nullptr && param->is_string() && values != nullptr && values->is_array() && !values->empty()) {
      ps.parameter = param->get<std::string>();
      ps.values.assign(values->begin(), values->end());
      spec.sweep = ps;
    }
  } else {
    batch.raw("sweep");
  }
  batch.finish();
  if (!errors.empty()) throw_errors(errors);

  // Sweep values must each produce a valid mission.
  for (const auto& m : expand_batch(spec)) (void)m;
  return spec;
}

BatchSpec load_batch_spec(const std::filesystem::path& path) { return batch_spec_from_json(read_json_file(path)); }

std::vector<BatchMission> expand_batch(const BatchSpec& spec) {
  struct Variant {
    MissionConfig config;
    std::string suffix;
  };
  std::vector<Variant> variants;
  if (spec.sweep) {
    std::string pointer = "/" + spec.sweep->parameter;
    for (auto& ch : pointer) {
      if (ch == '.') ch = '/';
    }
    for (const auto& value : spec.sweep->values) {
      json doc = spec.base_document;
      try {
        doc[json::json_pointer(pointer)] = value;
      } catch (const json::exception& e) {
        throw ConfigError("batch.sweep.parameter: " + std::string(e.what()));
      }
      variants.push_back({mission_config_from_json(doc), "|" + spec.sweep->parameter + "=" + value.dump()});
    }
  } else {
    variants.push_back({spec.base, ""});
  }

  std::vector<BatchMission> out;
  int index = 0;
  for (const auto& variant : variants) {
    for (const auto& combo : spec.combinations) {
      for (int trial = 0; trial < spec.trials; ++trial) {
        BatchMission m;
        m.index = index;
        m.config = variant.config;
        m.config.sensors.enabled = combo;
        m.config.seed = spec.root_seed + static_cast<std::uint64_t>(index);
        m.config.label = combo.label() + variant.suffix;
        out.push_back(std::move(m));
        ++index;
      }
    }
  }
  return out;
}

}  // namespace dronenav
