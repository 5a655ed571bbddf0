#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rxbench/core.hpp"
#include "rxbench/protogen.hpp"
#include "rxbench/simulator.hpp"

namespace rxbench::datagen {

inline constexpr double kFeetToMeters = 0.3048;
inline constexpr double kMaxPlausibleSpeed = 70.0;  // m/s

struct Episode {
  int id = 0;
  std::map<int, Trajectory> trajectories;  // entity index -> trajectory
  std::optional<double> yield_param;       // latent, synthetic episodes only
  std::optional<double> yield_onset_time;  // first instant the target switched to yielding
  std::optional<double> merge_success_time;
  bool aborted = false;
  bool host_merged_ahead = false;
};

Episode simulate_episode(const ScenarioConfig& config, std::uint64_t seed, int episode_id = 0,
                         std::optional<double> yield_param = std::nullopt);

/// Sliding windows at config.sample_stride; windows whose current time is at
/// or after the merge completion are dropped. Labels come from the nearest
/// prototype. Throws EpisodeTooShort.
std::vector<SceneSample> window_samples(const Episode& episode, const ScenarioConfig& config,
                                        std::span<const MotionPattern> patterns,
                                        const protogen::PlannerLimits& limits);

/// Role map: vehicle id -> entity index. Empty means order of first appearance.
using RoleMap = std::map<long, int>;

/// Vehicle ids are entity index + 1; positions are written with full precision.
void write_episode_csv(const Episode& episode, const std::filesystem::path& path, double lane_width);

/// Reads one episode per file, resampling every vehicle onto a common dt grid.
/// Throws ParseError (with row/column) or UnitError.
std::vector<Episode> ingest_csv(const std::filesystem::path& path, double dt = 0.1, const RoleMap& roles = {});

struct SplitResult {
  std::vector<SceneSample> train;
  std::vector<SceneSample> test;
};

/// Episode-level split; throws TooFewEpisodes if either side would be empty.
SplitResult split(std::span<const SceneSample> samples, double train_fraction, std::uint64_t seed);

struct Dataset {
  ScenarioConfig scenario;
  nlohmann::json manifest;
  std::vector<Episode> episodes;
};

/// Writes episode CSVs and manifest.json (carrying `extra` under "config").
void write_dataset(const std::filesystem::path& dir, const ScenarioConfig& scenario,
                   std::span<const Episode> episodes, const nlohmann::json& extra);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace rxbench::datagen
