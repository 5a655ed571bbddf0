#pragma once

#include <cstdint>

#include "rxbench/core.hpp"
#include "rxbench/criticality.hpp"
#include "rxbench/protogen.hpp"
#include "rxbench/simulator.hpp"

namespace rxbench::baselines {

/// Equal mass on every pattern.
PredictionDistribution uniform(std::size_t m);

/// One-hot on the pattern whose criticality differs most from the ground
/// truth. When every pattern is equally critical, the pattern farthest from
/// the ground truth by index is chosen (lower id on ties).
PredictionDistribution adversarial(const criticality::CriticalityProfile& profile, int gt_pattern);

/// Latent state of the simulated target at the prediction instant.
struct TargetLatent {
  double yield_param = 0.5;
  bool yielding = false;
};

struct OracleOptions {
  int rollouts = 64;
  double smoothing = 0.5;  // pseudo-count added to every pattern
  std::uint64_t seed = 1;
};

/// Monte Carlo posterior of the simulator's own target policy: the target is
/// rolled out from its current state against the recorded host and front
/// futures, and each rollout is labelled by its nearest prototype.
PredictionDistribution oracle_bayes(const SceneSample& sample, const protogen::PrototypeSet& protos,
                                    const datagen::ScenarioConfig& scenario, const TargetLatent& latent,
                                    const OracleOptions& options);

}  // namespace rxbench::baselines
