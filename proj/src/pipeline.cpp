#include "rxbench/pipeline.hpp"

#include "rxbench/error.hpp"

namespace rxbench::pipeline {

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

SceneContext make_context(const SceneSample& s, std::span<const MotionPattern> patterns,
                          const protogen::PlannerLimits& limits, double cr_max) {
  SceneContext ctx;
  ctx.protos = protogen::generate_prototypes(s, patterns, limits);
  ctx.profile = criticality::criticality_profile(s, ctx.protos, cr_max);
  return ctx;
}

metrics::EvaluationSet empty_set(std::span<const SceneSample> samples, std::span<const SceneContext> contexts) {
  if (samples.size() != contexts.size()) {
    throw Error(ErrorKind::DimensionMismatch, "one context per sample is required");
  }
  metrics::EvaluationSet set;
  set.m = contexts.empty() ? 0 : contexts.front().protos.size();
  set.horizon = samples.empty() ? 3.0 : samples.front().horizon;
  set.records.resize(samples.size());
  return set;
}

}  // namespace

std::vector<SceneContext> prepare(std::span<const SceneSample> samples, std::span<const MotionPattern> patterns,
                                  const protogen::PlannerLimits& limits, double cr_max) {
  std::vector<SceneContext> out(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) { out[i] = make_context(samples[i], patterns, limits, cr_max); });
  return out;
}

metrics::EvaluationSet evaluate(std::span<const SceneSample> samples, std::span<const SceneContext> contexts,
                                const Predictor& predict) {
  auto set = empty_set(samples, contexts);
  parallel_for(samples.size(), [&](std::size_t i) {
    set.records[i] = metrics::make_record(samples[i], predict(i, samples[i], contexts[i]), contexts[i].profile);
  });
  set.validate();
  return set;
}

namespace serial {

std::vector<SceneContext> prepare(std::span<const SceneSample> samples, std::span<const MotionPattern> patterns,
                                  const protogen::PlannerLimits& limits, double cr_max) {
  std::vector<SceneContext> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(make_context(s, patterns, limits, cr_max));
  return out;
}

metrics::EvaluationSet evaluate(std::span<const SceneSample> samples, std::span<const SceneContext> contexts,
                                const Predictor& predict) {
  auto set = empty_set(samples, contexts);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    set.records[i] = metrics::make_record(samples[i], predict(i, samples[i], contexts[i]), contexts[i].profile);
  }
  set.validate();
  return set;
}

}  // namespace serial

}  // namespace rxbench::pipeline
