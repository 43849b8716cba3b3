// dronenav: run a single delivery mission, a Monte Carlo batch, or re-aggregate
// stored mission outcomes.

#include "dronenav/config.hpp"
#include "dronenav/mission_io.hpp"
#include "dronenav/report.hpp"
#include "dronenav/simworld.hpp"

#include "CLI11.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace dronenav;

namespace {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kTimeout = 3, kDiverged = 4 };

int exit_code_for(const MissionLog& log) {
  switch (log.status) {
    case MissionStatus::Finished: return kOk;
    case MissionStatus::Timeout: return kTimeout;
    case MissionStatus::Diverged: return kDiverged;
  }
  return kFailure;
}

std::string mission_dir_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05d", index);
  return buf;
}

void print_summary(const nlohmann::json& summary) {
  for (const auto& c : summary.at("combinations")) {
    std::cout << c.at("label").get<std::string>() << ": missions=" << c.at("missions")
              << " landed=" << c.at("landed") << " hit_rate=" << c.at("hit_rate")
              << " mean_distance_m=" << c.at("mean_landing_distance_m")
              << " max_distance_m=" << c.at("max_landing_distance_m") << '\n';
  }
}

int run_cmd(const fs::path& config_path, std::optional<std::uint64_t> seed, const fs::path& out_dir) {
  MissionConfig config = load_mission_config(config_path);
  if (seed) config.seed = *seed;
  const MissionLog log = run_mission(config);
  write_mission_artifacts(log, 0, out_dir);
  std::cout << "status=" << to_string(log.status) << " landed=" << (log.landing ? "yes" : "no");
  if (log.landing) {
    std::cout << " landing_error_m=" << log.landing->distance
              << " on_platform=" << (log.landing->on_platform ? "yes" : "no");
  }
  std::cout << " artifacts=" << out_dir.string() << '\n';
  return exit_code_for(log);
}

int batch_cmd(const fs::path& spec_path, std::optional<std::uint64_t> seed, unsigned workers,
              const fs::path& out_dir, bool trajectories) {
  BatchSpec spec = load_batch_spec(spec_path);
  if (seed) spec.root_seed = *seed;
  const std::vector<BatchMission> missions = expand_batch(spec);

  std::vector<nlohmann::json> outcomes(missions.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < missions.size(); i = next.fetch_add(1)) {
      const BatchMission& m = missions[i];
      const MissionLog log = run_mission(m.config);
      write_mission_artifacts(log, m.index, out_dir / "missions" / mission_dir_name(m.index), trajectories);
      outcomes[i] = outcome_json(log, m.index);
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(missions.size())));
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < count; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  // Aggregate from the serialized form so report gives the same bytes.
  std::vector<OutcomeRecord> records;
  for (const auto& o : outcomes) records.push_back(outcome_from_json(nlohmann::json::parse(o.dump())));
  const nlohmann::json summary = summarize(records);
  write_text_file(out_dir / "summary.json", dump_json(summary));
  write_text_file(out_dir / "landing_scatter.csv", landing_scatter_csv(records));
  print_summary(summary);
  return kOk;
}

int report_cmd(const fs::path& logs_dir, const std::optional<fs::path>& out_dir) {
  const std::vector<OutcomeRecord> records = load_outcomes(logs_dir);
  const nlohmann::json summary = summarize(records);
  const fs::path target = out_dir.value_or(logs_dir);
  fs::create_directories(target);
  write_text_file(target / "summary.json", dump_json(summary));
  write_text_file(target / "landing_scatter.csv", landing_scatter_csv(records));
  print_summary(summary);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drone delivery navigation simulator"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
  std::string out_dir;
  bool trajectories = false;

  std::string config_path;
  auto* run = app.add_subcommand("run", "Simulate one mission from a configuration file");
  run->add_option("config", config_path, "Mission configuration (JSON)")->required();
  run->add_option("--seed", seed, "Override mission.seed");
  run->add_option("--out-dir", out_dir, "Directory for trajectory.csv, events.json, outcome.json")
      ->default_val("dronenav_out");

  std::string spec_path;
  auto* batch = app.add_subcommand("batch", "Run trials x source combinations and aggregate");
  batch->add_option("spec", spec_path, "Batch specification (mission config with a batch section)")->required();
  batch->add_option("--seed", seed, "Override batch.root_seed");
  batch->add_option("--workers", workers, "Missions simulated in parallel")->default_val(1)->check(CLI::PositiveNumber);
  batch->add_option("--out-dir", out_dir, "Output directory")->default_val("dronenav_batch");
  batch->add_flag("--trajectories", trajectories, "Also write trajectory.csv for every mission");

  std::string logs_dir;
  auto* report = app.add_subcommand("report", "Recompute summary.json from stored outcome.json files");
  report->add_option("dir", logs_dir, "Directory searched recursively for outcome.json")->required();
  report->add_option("--out-dir", out_dir, "Where to write summary.json (defaults to dir)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_cmd(config_path, seed, out_dir);
    if (batch->parsed()) return batch_cmd(spec_path, seed, workers, out_dir, trajectories);
    if (report->parsed()) {
      return report_cmd(logs_dir, out_dir.empty() ? std::nullopt : std::optional<fs::path>(out_dir));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ReportError& e) {
    std::cerr << "report error: " << e.what() << '\n';
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
