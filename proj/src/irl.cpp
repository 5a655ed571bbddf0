#include "rxbench/irl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rxbench::irl {

RawFeatures raw_features(const Trajectory& traj, const SceneSample& context, const FeatureConfig& config) {
  const Trajectory& host = context.future_host;
  const std::size_t n = traj.size();
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "feature trajectory needs at least 2 points");
  const double half_lengths = 0.5 * (host.vehicle_length + traj.vehicle_length);
  RawFeatures f{};
  double proximity = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& p = traj.points[k];
    f[0] += p.a * p.a;
    const double dev = p.v - config.desired_speed;
    f[2] += dev * dev;
    const std::size_t hk = std::min(k, host.size() - 1);
    const double clearance = std::max(0.0, std::abs(host.points[hk].x - p.x) - half_lengths);
    proximity += std::exp(-clearance / config.gap_scale);
  }
  const double dn = static_cast<double>(n);
  f[0] /= dn;
  f[2] /= dn;
  f[3] = proximity / dn;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double j = (traj.points[k + 1].a - traj.points[k].a) / traj.dt;
    f[1] += j * j;
  }
  f[1] /= static_cast<double>(n - 1);
  const std::size_t hl = std::min(n - 1, host.size() - 1);
  f[4] = host.rear_x(hl) - traj.front_x(n - 1);
  return f;
}

std::vector<double> standardize(const RawFeatures& raw, const IrlModel& model) {
  std::vector<double> out(raw.begin(), raw.end());
  if (model.feature_mean.size() == out.size()) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (out[i] - model.feature_mean[i]) / model.feature_std[i];
  }
  return out;
}

std::vector<double> features(const Trajectory& traj, const SceneSample& context, const IrlModel& model) {
  return standardize(raw_features(traj, context, model.config), model);
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::vector<double> candidate_probabilities(std::span<const double> theta,
                                            const std::vector<std::vector<double>>& candidates) {
  std::vector<double> neg_cost;
  neg_cost.reserve(candidates.size());
  for (const auto& c : candidates) neg_cost.push_back(-dot(theta, c));
  return softmax(neg_cost).probs;
}

LogLikGrad irl_loglik_grad(std::span<const double> theta, std::span<const Demonstration> demos) {
  LogLikGrad out{0.0, std::vector<double>(theta.size(), 0.0)};
  for (const auto& d : demos) {
    if (d.candidates.empty()) throw Error(ErrorKind::InvalidArgument, "demonstration without candidates");
    std::vector<double> neg_cost;
    for (const auto& c : d.candidates) {
      if (c.size() != theta.size()) throw Error(ErrorKind::DimensionMismatch, "candidate feature size");
      neg_cost.push_back(-dot(theta, c));
    }
    const double lse = log_sum_exp(neg_cost);
    out.loglik += -dot(theta, d.demo) - lse;
    for (std::size_t c = 0; c < d.candidates.size(); ++c) {
      const double p = std::exp(neg_cost[c] - lse);
      for (std::size_t i = 0; i < theta.size(); ++i) out.grad[i] += p * d.candidates[c][i];
    }
    for (std::size_t i = 0; i < theta.size(); ++i) out.grad[i] -= d.demo[i];
  }
  return out;
}

IrlTrainResult train_irl(std::span<const Demonstration> demos, std::size_t n_features, const IrlTrainOptions& options) {
  if (demos.empty()) throw Error(ErrorKind::EmptyData, "IRL training needs at least one demonstration");
  IrlTrainResult res;
  res.theta.assign(n_features, 0.0);
  auto cur = irl_loglik_grad(res.theta, demos);
  res.loglik_history.push_back(cur.loglik);
  double lr = options.lr;
  if (lr == 0.0) return res;
  for (int it = 0; it < options.iters; ++it) {
    bool accepted = false;
    for (int half = 0; half <= options.max_halvings; ++half, lr *= 0.5) {
      std::vector<double> next = res.theta;
      for (std::size_t i = 0; i < n_features; ++i) next[i] += lr * cur.grad[i];
      auto cand = irl_loglik_grad(next, demos);
      if (!std::isfinite(cand.loglik)) {
        throw Error(ErrorKind::Divergence, "IRL log-likelihood became non-finite at iteration " + std::to_string(it));
      }
      if (cand.loglik >= cur.loglik) {
        const double gain = cand.loglik - cur.loglik;
        res.theta = std::move(next);
        cur = std::move(cand);
        accepted = true;
        res.loglik_history.push_back(cur.loglik);
        ++res.iterations;
        if (gain < options.tol) return res;
        break;
      }
    }
    if (!accepted) break;
  }
  return res;
}

IrlFitResult fit_irl(std::span<const SceneSample> samples, std::span<const protogen::PrototypeSet> protos,
                     const FeatureConfig& config, const IrlTrainOptions& options) {
  if (samples.empty()) throw Error(ErrorKind::EmptyData, "IRL fit needs samples");
  if (samples.size() != protos.size()) throw Error(ErrorKind::DimensionMismatch, "one prototype set per sample");
  IrlFitResult out;
  IrlModel& model = out.model;
  model.config = config;
  model.seed = options.seed;

  std::vector<RawFeatures> demo_raw;
  std::vector<std::vector<RawFeatures>> cand_raw;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    demo_raw.push_back(raw_features(samples[s].future_predicted, samples[s], config));
    std::vector<RawFeatures> cands;
    for (const auto& p : protos[s].prototypes) cands.push_back(raw_features(p.trajectory, samples[s], config));
    cands.push_back(demo_raw.back());
    cand_raw.push_back(std::move(cands));
  }

  model.feature_mean.assign(kNumFeatures, 0.0);
  model.feature_std.assign(kNumFeatures, 0.0);
  double count = 0.0;
  for (const auto& cs : cand_raw) {
    for (const auto& c : cs) {
      for (std::size_t i = 0; i < kNumFeatures; ++i) model.feature_mean[i] += c[i];
      count += 1.0;
    }
  }
  for (double& m : model.feature_mean) m /= count;
  for (const auto& cs : cand_raw) {
    for (const auto& c : cs) {
      for (std::size_t i = 0; i < kNumFeatures; ++i) {
        const double e = c[i] - model.feature_mean[i];
        model.feature_std[i] += e * e / count;
      }
    }
  }
  for (double& s : model.feature_std) s = s > 1e-24 ? std::sqrt(s) : 1.0;

  std::vector<Demonstration> demos;
  demos.reserve(samples.size());
  for (std::size_t s = 0; s < samples.size(); ++s) {
    Demonstration d;
    d.demo = standardize(demo_raw[s], model);
    for (const auto& c : cand_raw[s]) d.candidates.push_back(standardize(c, model));
    demos.push_back(std::move(d));
  }
  auto trained = train_irl(demos, kNumFeatures, options);
  model.theta = std::move(trained.theta);
  out.loglik_history = std::move(trained.loglik_history);
  return out;
}

PredictionDistribution predict_irl(const IrlModel& model, const SceneSample& sample,
                                   const protogen::PrototypeSet& protos) {
  std::vector<std::vector<double>> cands;
  cands.reserve(protos.size());
  for (const auto& p : protos.prototypes) cands.push_back(features(p.trajectory, sample, model));
  return PredictionDistribution{candidate_probabilities(model.theta, cands)};
}

nlohmann::json to_json(const IrlModel& model, const IrlTrainOptions& options,
                       const std::vector<double>& loglik_history) {
  return {{"kind", "irl"},
          {"version", 1},
          {"theta", model.theta},
          {"feature_config",
           {{"names", model.config.names},
            {"desired_speed", model.config.desired_speed},
            {"gap_scale", model.config.gap_scale}}},
          {"feature_mean", model.feature_mean},
          {"feature_std", model.feature_std},
          {"seed", model.seed},
          {"train", {{"lr", options.lr}, {"iters", options.iters}, {"tol", options.tol}}},
          {"loglik_history", loglik_history}};
}

IrlModel irl_model_from_json(const nlohmann::json& j) {
  if (j.at("kind") != "irl" || j.at("version") != 1) {
    throw Error(ErrorKind::ParseError, "not a version-1 irl model document");
  }
  IrlModel m;
  m.theta = j.at("theta").get<std::vector<double>>();
  const auto& fc = j.at("feature_config");
  m.config.names = fc.at("names").get<std::vector<std::string>>();
  m.config.desired_speed = fc.at("desired_speed");
  m.config.gap_scale = fc.at("gap_scale");
  m.feature_mean = j.at("feature_mean").get<std::vector<double>>();
  m.feature_std = j.at("feature_std").get<std::vector<double>>();
  m.seed = j.at("seed");
  if (m.theta.size() != m.config.names.size()) throw Error(ErrorKind::ParseError, "theta size != feature count");
  return m;
}

}  // namespace rxbench::irl
