#include "rxbench/criticality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rxbench::criticality {

namespace {

double overlap_half_width(const Trajectory& host, const Trajectory& target) {
  return 0.5 * (host.vehicle_width + target.vehicle_width);
}

}  // namespace

bool bodies_overlap(const Trajectory& host, const Trajectory& target, std::size_t i) {
  return std::abs(host.points[i].y - target.points[i].y) < overlap_half_width(host, target);
}

std::optional<double> merge_point(const Trajectory& host_future, const Trajectory& target_path) {
  const std::size_t n = std::min(host_future.size(), target_path.size());
  if (n == 0) return std::nullopt;
  const double w = overlap_half_width(host_future, target_path);
  if (bodies_overlap(host_future, target_path, 0)) return host_future.rear_x(0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (!bodies_overlap(host_future, target_path, k + 1)) continue;
    const double dy0 = host_future.points[k].y - target_path.points[k].y;
    const double dy1 = host_future.points[k + 1].y - target_path.points[k + 1].y;
    const double boundary = dy0 > 0.0 ? w : -w;
    const double f = std::clamp((boundary - dy0) / (dy1 - dy0), 0.0, 1.0);
    const double r0 = host_future.rear_x(k);
    const double r1 = host_future.rear_x(k + 1);
    return r0 + f * (r1 - r0);
  }
  return std::nullopt;
}

std::vector<MergeState> merge_track(const Trajectory& host_future, const Trajectory& target_path) {
  const std::size_t n = std::min(host_future.size(), target_path.size());
  std::vector<MergeState> track(n);
  bool entered = false;
  for (std::size_t k = 0; k < n; ++k) {
    entered = entered || bodies_overlap(host_future, target_path, k);
    if (entered) track[k] = {true, host_future.rear_x(k), host_future.points[k].v};
  }
  return track;
}

double ttc(const Trajectory& target_traj, std::span<const MergeState> track) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t n = std::min(target_traj.size(), track.size());
  double best = inf;
  bool ahead_of_target = false;
  for (std::size_t k = 0; k < n; ++k) {
    if (!track[k].active) continue;
    const double elapsed = target_traj.points[k].t - target_traj.points[0].t;
    const double gap = track[k].x - target_traj.front_x(k);
    if (gap <= 0.0) {
      if (ahead_of_target) return std::min(best, elapsed);
      continue;
    }
    ahead_of_target = true;
    const double closing = target_traj.points[k].v - track[k].v;
    if (closing > 0.0) best = std::min(best, elapsed + gap / closing);
  }
  return best;
}

double ttc(const Trajectory& target_traj, std::optional<double> merge_x) {
  if (!merge_x) return std::numeric_limits<double>::infinity();
  const std::vector<MergeState> track(target_traj.size(), MergeState{true, *merge_x, 0.0});
  return ttc(target_traj, track);
}

double criticality_from_ttc(double ttc_s, double cr_max) {
  if (std::isinf(ttc_s)) return 0.0;
  if (ttc_s <= 0.0) return cr_max;
  return std::clamp(1.0 / ttc_s, 0.0, cr_max);
}

CriticalityProfile make_profile(std::vector<double> cr, int gt_pattern) {
  if (gt_pattern < 1 || static_cast<std::size_t>(gt_pattern) > cr.size()) {
    throw Error(ErrorKind::PatternOutOfRange, "ground-truth pattern outside criticality vector");
  }
  CriticalityProfile p;
  p.cr = std::move(cr);
  p.cr_gt = p.cr[static_cast<std::size_t>(gt_pattern - 1)];
  p.order.resize(p.cr.size());
  std::iota(p.order.begin(), p.order.end(), 1);
  std::stable_sort(p.order.begin(), p.order.end(), [&](int a, int b) {
    return p.cr[static_cast<std::size_t>(a - 1)] < p.cr[static_cast<std::size_t>(b - 1)];
  });
  p.m_index = static_cast<int>(std::count_if(p.cr.begin(), p.cr.end(), [&](double c) { return c < p.cr_gt; }));
  return p;
}

CriticalityProfile criticality_profile(const SceneSample& sample, const protogen::PrototypeSet& protos,
                                       double cr_max) {
  std::vector<double> cr;
  cr.reserve(protos.size());
  for (const auto& proto : protos.prototypes) {
    const auto track = merge_track(sample.future_host, proto.trajectory);
    cr.push_back(criticality_from_ttc(ttc(proto.trajectory, track), cr_max));
  }
  return make_profile(std::move(cr), sample.gt_pattern);
}

}  // namespace rxbench::criticality
