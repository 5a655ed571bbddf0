#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <span>
#include <vector>

#include "rxbench/core.hpp"
#include "rxbench/criticality.hpp"
#include "rxbench/metrics.hpp"
#include "rxbench/protogen.hpp"

namespace rxbench::pipeline {

/// Runs body(i) for i in [0, n) on the OpenMP team. An exception thrown by any
/// iteration is rethrown after the loop; the lowest index wins.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Per-sample prototypes and criticality profile.
struct SceneContext {
  protogen::PrototypeSet protos;
  criticality::CriticalityProfile profile;
};

std::vector<SceneContext> prepare(std::span<const SceneSample> samples, std::span<const MotionPattern> patterns,
                                  const protogen::PlannerLimits& limits, double cr_max);

/// Must be safe to call concurrently for different indices.
using Predictor = std::function<PredictionDistribution(std::size_t, const SceneSample&, const SceneContext&)>;

metrics::EvaluationSet evaluate(std::span<const SceneSample> samples, std::span<const SceneContext> contexts,
                                const Predictor& predict);

namespace serial {
std::vector<SceneContext> prepare(std::span<const SceneSample> samples, std::span<const MotionPattern> patterns,
                                  const protogen::PlannerLimits& limits, double cr_max);
metrics::EvaluationSet evaluate(std::span<const SceneSample> samples, std::span<const SceneContext> contexts,
                                const Predictor& predict);
}  // namespace serial

}  // namespace rxbench::pipeline
