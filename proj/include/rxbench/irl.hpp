#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rxbench/core.hpp"
#include "rxbench/protogen.hpp"

namespace rxbench::irl {

inline constexpr std::size_t kNumFeatures = 5;

struct FeatureConfig {
  double desired_speed = 15.0;  // m/s
  double gap_scale = 5.0;       // m
  std::vector<std::string> names = {"mean_sq_accel", "mean_sq_jerk", "mean_sq_speed_dev", "proximity",
                                    "terminal_gap"};
};

struct IrlModel {
  std::vector<double> theta;
  FeatureConfig config;
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  std::uint64_t seed = 1;
};

using RawFeatures = std::array<double, kNumFeatures>;

/// Unstandardized features of a predicted-vehicle trajectory paired with the
/// host ground-truth future in `context`:
///   mean a^2, mean jerk^2, mean (v - v_des)^2,
///   mean exp(-clearance / gap_scale), host rear - target front at the horizon.
RawFeatures raw_features(const Trajectory& traj, const SceneSample& context, const FeatureConfig& config);

std::vector<double> standardize(const RawFeatures& raw, const IrlModel& model);

/// Standardized feature vector for the trajectory under the model's config.
std::vector<double> features(const Trajectory& traj, const SceneSample& context, const IrlModel& model);

struct Demonstration {
  std::vector<double> demo;                     // standardized f(demo)
  std::vector<std::vector<double>> candidates;  // must include the demo
};

struct LogLikGrad {
  double loglik = 0.0;
  std::vector<double> grad;  // ascent direction: sum(E_model[f] - f(demo))
};

LogLikGrad irl_loglik_grad(std::span<const double> theta, std::span<const Demonstration> demos);

/// Softmax over -theta . f for each candidate.
std::vector<double> candidate_probabilities(std::span<const double> theta,
                                            const std::vector<std::vector<double>>& candidates);

struct IrlTrainOptions {
  double lr = 0.5;
  int iters = 200;
  std::uint64_t seed = 1;
  double tol = 1e-10;
  int max_halvings = 20;
};

struct IrlTrainResult {
  std::vector<double> theta;
  std::vector<double> loglik_history;
  int iterations = 0;
};

/// Gradient ascent from theta = 0; a step that lowers the likelihood is
/// retried with half the rate, up to max_halvings times.
IrlTrainResult train_irl(std::span<const Demonstration> demos, std::size_t n_features, const IrlTrainOptions& options);

/// Builds standardized demonstrations (ground-truth future + M prototypes),
/// fits the statistics and theta.
struct IrlFitResult {
  IrlModel model;
  std::vector<double> loglik_history;
};
IrlFitResult fit_irl(std::span<const SceneSample> samples, std::span<const protogen::PrototypeSet> protos,
                     const FeatureConfig& config, const IrlTrainOptions& options);

PredictionDistribution predict_irl(const IrlModel& model, const SceneSample& sample,
                                   const protogen::PrototypeSet& protos);

nlohmann::json to_json(const IrlModel& model, const IrlTrainOptions& options,
                       const std::vector<double>& loglik_history);
IrlModel irl_model_from_json(const nlohmann::json& j);

}  // namespace rxbench::irl
