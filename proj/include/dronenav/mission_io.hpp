#pragma once

#include "dronenav/simworld.hpp"

#include "json.hpp"

#include <filesystem>
#include <ostream>
#include <string>

namespace dronenav {

inline constexpr int kTrajectorySchemaVersion = 1;
inline constexpr const char* kOutcomeSchema = "dronenav.outcome/1";
inline constexpr const char* kEventsSchema = "dronenav.events/1";

/// Shortest decimal form that reads back to the same double.
std::string format_double(double value);

/// Column names of trajectory.csv, units in the names.
const std::vector<std::string>& trajectory_columns();

/// One comment line with the schema version, the header row, one row per step.
void write_trajectory_csv(const MissionLog& log, std::ostream& out);

nlohmann::json events_json(const MissionLog& log);

nlohmann::json outcome_json(const MissionLog& log, int mission_index);

/// Writes trajectory.csv (optional), events.json and outcome.json into `dir`.
void write_mission_artifacts(const MissionLog& log, int mission_index, const std::filesystem::path& dir,
                             bool with_trajectory = true);

/// Deterministic JSON text (sorted keys, 2-space indent, trailing newline).
std::string dump_json(const nlohmann::json& j);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace dronenav
