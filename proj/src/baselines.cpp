#include "rxbench/baselines.hpp"

#include <cmath>
#include <cstdlib>

#include "rxbench/error.hpp"
#include "rxbench/random.hpp"

namespace rxbench::baselines {

PredictionDistribution uniform(std::size_t m) {
  if (m == 0) throw Error(ErrorKind::InvalidArgument, "uniform baseline needs at least one pattern");
  return {std::vector<double>(m, 1.0 / static_cast<double>(m))};
}

PredictionDistribution adversarial(const criticality::CriticalityProfile& profile, int gt_pattern) {
  const std::size_t m = profile.cr.size();
  if (gt_pattern < 1 || static_cast<std::size_t>(gt_pattern) > m) {
    throw Error(ErrorKind::PatternOutOfRange, "ground truth " + std::to_string(gt_pattern) + " outside 1.." +
                                                  std::to_string(m));
  }
  const double cr_gt = profile.cr[static_cast<std::size_t>(gt_pattern - 1)];
  std::size_t pick = 0;
  double best = -1.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double dev = std::abs(profile.cr[j] - cr_gt);
    if (dev > best) {
      best = dev;
      pick = j;
    }
  }
  if (best <= 0.0) {
    int far = -1;
    for (std::size_t j = 0; j < m; ++j) {
      const int d = std::abs(static_cast<int>(j) + 1 - gt_pattern);
      if (d > far) {
        far = d;
        pick = j;
      }
    }
  }
  PredictionDistribution out{std::vector<double>(m, 0.0)};
  out.probs[pick] = 1.0;
  return out;
}

namespace {

datagen::VehicleState state_at(const Trajectory& traj, std::size_t k) {
  const auto& p = traj.points[k];
  datagen::VehicleState s;
  s.x = p.x;
  s.v = p.v;
  s.a = p.a;
  s.y = p.y;
  s.length = traj.vehicle_length;
  s.width = traj.vehicle_width;
  return s;
}

}  // namespace

PredictionDistribution oracle_bayes(const SceneSample& sample, const protogen::PrototypeSet& protos,
                                    const datagen::ScenarioConfig& scenario, const TargetLatent& latent,
                                    const OracleOptions& options) {
  if (options.rollouts < 1 || !(options.smoothing >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "oracle needs at least one rollout and non-negative smoothing");
  }
  const Trajectory& host = sample.future_host;
  const std::size_t n = host.size();
  if (sample.future_front && sample.future_front->size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "front future does not match the host future");
  }
  const Trajectory& hist = sample.target_history();
  const double dt = hist.dt;
  const auto step0 = static_cast<std::size_t>(std::llround(sample.t0 / dt));
  const std::size_t m = protos.size();
  std::vector<double> counts(m, options.smoothing);

  for (int r = 0; r < options.rollouts; ++r) {
    std::mt19937_64 rng(splitmix64(options.seed ^ splitmix64(static_cast<std::uint64_t>(sample.sample_id) * 7919u +
                                                             static_cast<std::uint64_t>(r))));
    datagen::TargetController controller(scenario, latent.yield_param,
                                         latent.yielding ? datagen::TargetMode::Yield : datagen::TargetMode::Normal);
    datagen::VehicleState target = state_at(hist, hist.size() - 1);
    Trajectory path;
    path.dt = dt;
    path.vehicle_length = hist.vehicle_length;
    path.vehicle_width = hist.vehicle_width;
    path.points.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = host.points[k].t;
      std::optional<datagen::VehicleState> front;
      if (sample.future_front) front = state_at(*sample.future_front, k);
      const double a = controller.accel(step0 + k, target, state_at(host, k), front, rng);
      target.a = std::max(a, -target.v / dt);
      path.points.push_back({t, target.x, target.v, target.a, target.y});
      if (k + 1 < n) datagen::advance(target, target.a, dt);
    }
    counts[static_cast<std::size_t>(protogen::label_ground_truth(path, protos) - 1)] += 1.0;
  }
  double total = 0.0;
  for (double c : counts) total += c;
  for (double& c : counts) c /= total;
  return {counts};
}

}  // namespace rxbench::baselines
