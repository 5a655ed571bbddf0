#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rxbench/core.hpp"
#include "rxbench/protogen.hpp"

namespace rxbench::criticality {

inline constexpr double kDefaultCrMax = 10.0;  // 1/s, i.e. a TTC floor of 0.1 s

struct CriticalityProfile {
  std::vector<double> cr;  // 1/s, index j-1 for pattern j
  double cr_gt = 0.0;
  std::vector<int> order;  // pattern ids sorted by cr ascending, stable on id
  int m_index = 0;         // patterns strictly less critical than the ground truth
};

/// Whether the host body overlaps the target's swept path at sample i.
bool bodies_overlap(const Trajectory& host, const Trajectory& target, std::size_t i);

/// Rear-end position of the host when its body first overlaps the target's
/// path; the crossing instant is found by linear interpolation of the lateral
/// offsets between samples. nullopt if no overlap occurs within the horizon.
std::optional<double> merge_point(const Trajectory& host_future, const Trajectory& target_path);

/// Merging point at one sample: the host rear while its body overlaps the
/// target path, moving at the host speed.
struct MergeState {
  bool active = false;
  double x = 0.0;
  double v = 0.0;
};

/// Per-sample merging point, inactive before the first overlap.
std::vector<MergeState> merge_track(const Trajectory& host_future, const Trajectory& target_path);

/// Earliest projected contact time, measured from the first sample: at every
/// closing sample, elapsed time plus gap / closing speed, where the gap runs
/// from the target front to the merging point. Samples where the target front
/// is already ahead of the merging point are skipped until the gap first turns
/// positive; a later gap <= 0 caps the result at that sample's elapsed time.
/// +inf if it never closes.
double ttc(const Trajectory& target_traj, std::span<const MergeState> track);

/// Fixed merging point; nullopt gives +inf.
double ttc(const Trajectory& target_traj, std::optional<double> merge_x);

double criticality_from_ttc(double ttc_s, double cr_max);

CriticalityProfile make_profile(std::vector<double> cr, int gt_pattern);

/// Pairs every prototype with the host ground-truth future.
CriticalityProfile criticality_profile(const SceneSample& sample, const protogen::PrototypeSet& protos,
                                       double cr_max = kDefaultCrMax);

}  // namespace rxbench::criticality
