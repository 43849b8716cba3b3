#pragma once

#include "dronenav/simworld.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dronenav {

/// Parses a mission document (sections mission, path, field, drone, ekf,
/// sensors, platform, batch). Unknown keys, wrong types and violated
/// invariants are all reported in one ConfigError.
MissionConfig mission_config_from_json(const nlohmann::json& doc);

/// Reads and parses a JSON file. Syntax errors become ConfigError.
nlohmann::json read_json_file(const std::filesystem::path& path);

MissionConfig load_mission_config(const std::filesystem::path& path);

struct ParameterSweep {
  std::string parameter;  // dotted path, e.g. "field.k_f"
  std::vector<nlohmann::json> values;
};

struct BatchSpec {
  nlohmann::json base_document;
  MissionConfig base;
  int trials = 1;
  std::uint64_t root_seed = 1;
  std::vector<SourceSet> combinations;
  std::optional<ParameterSweep> sweep;
};

/// One mission of a batch, in execution order.
struct BatchMission {
  int index = 0;
  MissionConfig config;
};

BatchSpec batch_spec_from_json(const nlohmann::json& doc);
BatchSpec load_batch_spec(const std::filesystem::path& path);

/// Expands sweep values x combinations x trials. Mission i gets seed root_seed + i.
std::vector<BatchMission> expand_batch(const BatchSpec& spec);

}  // namespace dronenav
