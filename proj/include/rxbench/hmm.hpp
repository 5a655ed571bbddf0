#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "rxbench/core.hpp"
#include "rxbench/protogen.hpp"

namespace rxbench::hmm {

inline constexpr double kVarianceFloor = 1e-6;

using Observation = std::vector<double>;
using Sequence = std::vector<Observation>;

struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> var;

  std::size_t dim() const { return mean.size(); }
  double log_density(std::span<const double> x) const;
};

struct GaussianMixture {
  std::vector<double> weights;
  std::vector<DiagGaussian> components;

  std::size_t dim() const { return components.empty() ? 0 : components.front().dim(); }
  double log_density(std::span<const double> x) const;
  double density(std::span<const double> x) const;
};

struct GaussianHmm {
  std::size_t n_states = 1;
  std::vector<double> initial;     // H
  std::vector<double> transition;  // H x H, row-major, row-stochastic
  std::vector<DiagGaussian> emissions;

  std::size_t dim() const { return emissions.empty() ? 0 : emissions.front().dim(); }
  double a(std::size_t i, std::size_t j) const { return transition[i * n_states + j]; }
  void validate() const;
};

/// log P(obs | hmm) by the scaled forward recursion. Throws DimensionMismatch.
double forward_loglik(const GaussianHmm& model, const Sequence& obs);

struct BaumWelchOptions {
  std::size_t n_states = 3;
  std::uint64_t seed = 1;
  int max_iter = 100;
  double tol = 1e-6;
  double var_floor = kVarianceFloor;
};

struct BaumWelchResult {
  GaussianHmm model;
  std::vector<double> loglik_history;  // total log-likelihood before each M-step
  int iterations = 0;
  bool converged = false;
};

/// Multi-sequence EM. Initial emissions come from equal-count quantile bins of
/// the first feature; the seed only jitters the initial means.
BaumWelchResult baum_welch(const std::vector<Sequence>& sequences, const BaumWelchOptions& options);

struct GmmOptions {
  std::size_t n_components = 3;
  std::uint64_t seed = 1;
  int max_iter = 200;
  double tol = 1e-8;
  double var_floor = kVarianceFloor;
};

GaussianMixture fit_gmm(const std::vector<Observation>& points, const GmmOptions& options);

// ---- cascade predictor ----

struct SituationModel {
  int situation_id = 1;
  GaussianHmm hmm;
  GaussianMixture gmm;
};

struct HmmPredictorModel {
  std::vector<SituationModel> situations;
  BaumWelchOptions hmm_options;
  GmmOptions gmm_options;
  std::vector<std::vector<double>> training_loglik;  // per situation
};

/// Per history frame: [host rear - target front, v_host - v_target,
/// a_target, y_host - y_target].
Sequence observation_sequence(const SceneSample& sample);

/// Displacement of a trajectory from its first point at 1/3, 2/3 and 3/3 of the horizon.
Observation trajectory_descriptor(const Trajectory& traj, double horizon);

/// Trains one HMM + GMM per situation id (1 = host merges first, 2 = target passes first).
HmmPredictorModel fit_hmm_predictor(std::span<const SceneSample> samples, const BaumWelchOptions& hmm_options,
                                    const GmmOptions& gmm_options);

/// Normalized situation posteriors p^k from the forward log-likelihoods.
std::vector<double> situation_posterior(const HmmPredictorModel& model, const SceneSample& sample);

PredictionDistribution predict_hmm(const HmmPredictorModel& model, const SceneSample& sample,
                                   const protogen::PrototypeSet& protos);

nlohmann::json to_json(const HmmPredictorModel& model);
HmmPredictorModel hmm_model_from_json(const nlohmann::json& j);

}  // namespace rxbench::hmm
