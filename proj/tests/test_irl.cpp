#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rxbench/datagen.hpp"
#include "rxbench/irl.hpp"
#include "support.hpp"

using namespace rxbench;
using namespace rxbench::irl;

namespace {

SceneSample context_with_host(const Trajectory& host) {
  SceneSample s;
  s.future_host = host;
  return s;
}

std::vector<Demonstration> random_demos(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  std::vector<Demonstration> out(n);
  for (auto& d : out) {
    const std::size_t k = 2 + rng() % 4;
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> f(dim);
      for (auto& x : f) x = uniform(rng, -2.0, 2.0);
      d.candidates.push_back(f);
    }
    d.demo = d.candidates[rng() % k];
  }
  return out;
}

}  // namespace

TEST(IrlFeatures, ConstantSpeedFarFromHost) {
  FeatureConfig cfg;
  cfg.desired_speed = 12.0;
  const auto traj = rxtest::const_traj(0.0, 12.0, 30);
  const auto host = rxtest::const_traj(500.0, 12.0, 30);
  const auto f = raw_features(traj, context_with_host(host), cfg);
  EXPECT_NEAR(f[0], 0.0, 1e-15);
  EXPECT_NEAR(f[1], 0.0, 1e-15);
  EXPECT_NEAR(f[2], 0.0, 1e-15);
  EXPECT_LT(f[3], 1e-40);
  EXPECT_NEAR(f[4], 500.0 - 4.8, 1e-9);
}

TEST(IrlFeatures, StationarySpeedDeviation) {
  FeatureConfig cfg;
  cfg.desired_speed = 10.0;
  const auto traj = rxtest::const_traj(0.0, 0.0, 30);
  const auto f = raw_features(traj, context_with_host(rxtest::const_traj(100.0, 10.0, 30)), cfg);
  EXPECT_NEAR(f[2], 100.0, 1e-12);
}

TEST(IrlFeatures, SimulatedPrototypesMatchIndependentCalculator) {
  datagen::ScenarioConfig scfg;
  const auto ep = datagen::simulate_episode(scfg, 42, 42);
  const auto samples = datagen::window_samples(ep, scfg, default_patterns(), protogen::PlannerLimits{});
  FeatureConfig cfg;
  cfg.desired_speed = scfg.speed_limit;
  for (const auto& s : samples) {
    const auto set = protogen::generate_prototypes(s, default_patterns(), protogen::PlannerLimits{});
    for (const auto& p : set.prototypes) {
      const auto& tr = p.trajectory;
      const auto& host = s.future_host;
      const std::size_t n = tr.size();
      double acc = 0, jerk = 0, dev = 0, prox = 0;
      for (std::size_t k = 0; k < n; ++k) {
        acc += tr.points[k].a * tr.points[k].a / n;
        dev += std::pow(tr.points[k].v - cfg.desired_speed, 2) / n;
        const double centre_gap = std::abs(host.points[k].x - tr.points[k].x);
        const double clear = std::max(0.0, centre_gap - 0.5 * (host.vehicle_length + tr.vehicle_length));
        prox += std::exp(-clear / cfg.gap_scale) / n;
        if (k + 1 < n) jerk += std::pow((tr.points[k + 1].a - tr.points[k].a) / tr.dt, 2) / (n - 1);
      }
      const double term = (host.back().x - 0.5 * host.vehicle_length) - (tr.back().x + 0.5 * tr.vehicle_length);
      const auto f = raw_features(tr, s, cfg);
      const std::array<double, 5> want{acc, jerk, dev, prox, term};
      for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(f[i], want[i], 1e-9 * (1.0 + std::abs(want[i])));
    }
  }
}

TEST(IrlLikelihood, ZeroThetaIsUniform) {
  std::mt19937_64 rng(1);
  const auto demos = random_demos(rng, 4, 3);
  const std::vector<double> theta(3, 0.0);
  const auto r = irl_loglik_grad(theta, demos);
  double ll = 0.0;
  std::vector<double> g(3, 0.0);
  for (const auto& d : demos) {
    const double k = static_cast<double>(d.candidates.size());
    ll -= std::log(k);
    for (std::size_t i = 0; i < 3; ++i) {
      for (const auto& c : d.candidates) g[i] += c[i] / k;
      g[i] -= d.demo[i];
    }
    for (double p : candidate_probabilities(theta, d.candidates)) EXPECT_NEAR(p, 1.0 / k, 1e-15);
  }
  EXPECT_NEAR(r.loglik, ll, 1e-12);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(r.grad[i], g[i], 1e-12);
}

TEST(IrlLikelihood, TwoPointSoftmax) {
  const std::vector<double> theta{1.0};
  const auto p = candidate_probabilities(theta, {{0.0}, {std::log(3.0)}});
  EXPECT_NEAR(p[0], 0.75, 1e-15);
  EXPECT_NEAR(p[1], 0.25, 1e-15);
}

TEST(IrlLikelihood, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto demos = random_demos(rng, 3, 5);
    std::vector<double> theta(5);
    for (auto& t : theta) t = uniform(rng, -1.5, 1.5);
    const auto g = irl_loglik_grad(theta, demos).grad;
    for (std::size_t i = 0; i < 5; ++i) {
      auto plus = theta, minus = theta;
      plus[i] += 1e-6;
      minus[i] -= 1e-6;
      const double fd = (irl_loglik_grad(plus, demos).loglik - irl_loglik_grad(minus, demos).loglik) / 2e-6;
      EXPECT_LE(std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-2}), 1e-6);
    }
  }
}

TEST(IrlLikelihood, ShiftInvariance) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto d = random_demos(rng, 1, 4)[0];
    std::vector<double> theta(4);
    for (auto& t : theta) t = uniform(rng, -2.0, 2.0);
    const auto before = candidate_probabilities(theta, d.candidates);
    std::vector<double> shift(4);
    for (auto& s : shift) s = uniform(rng, -50.0, 50.0);
    for (auto& c : d.candidates) {
      for (std::size_t i = 0; i < 4; ++i) c[i] += shift[i];
    }
    const auto after = candidate_probabilities(theta, d.candidates);
    for (std::size_t k = 0; k < before.size(); ++k) EXPECT_NEAR(before[k], after[k], 1e-12);
  }
}

TEST(IrlTrain, LearnsSeparableDemonstration) {
  std::vector<Demonstration> demos;
  for (int i = 0; i < 5; ++i) demos.push_back({{-1.0, 0.0}, {{-1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}});
  IrlTrainOptions opt;
  const auto r = train_irl(demos, 2, opt);
  EXPECT_GE(candidate_probabilities(r.theta, demos[0].candidates)[0], 0.9);
  for (std::size_t i = 1; i < r.loglik_history.size(); ++i) {
    EXPECT_GE(r.loglik_history[i], r.loglik_history[i - 1]);
  }
}

TEST(IrlTrain, ZeroRateAndDeterminism) {
  std::mt19937_64 rng(4);
  const auto demos = random_demos(rng, 6, 5);
  IrlTrainOptions opt;
  opt.lr = 0.0;
  EXPECT_EQ(train_irl(demos, 5, opt).theta, std::vector<double>(5, 0.0));
  opt.lr = 0.5;
  EXPECT_EQ(train_irl(demos, 5, opt).theta, train_irl(demos, 5, opt).theta);
}

TEST(IrlPredict, SymmetryAndRoundTrip) {
  datagen::ScenarioConfig scfg;
  std::vector<SceneSample> samples;
  for (int id = 1; id <= 6; ++id) {
    const auto ep = datagen::simulate_episode(scfg, splitmix64(static_cast<std::uint64_t>(id) + 100), id);
    const auto w = datagen::window_samples(ep, scfg, default_patterns(), protogen::PlannerLimits{});
    samples.insert(samples.end(), w.begin(), w.end());
  }
  std::vector<protogen::PrototypeSet> sets;
  for (const auto& s : samples) sets.push_back(protogen::generate_prototypes(s, default_patterns(), {}));
  FeatureConfig cfg;
  cfg.desired_speed = scfg.speed_limit;
  const auto fit = fit_irl(samples, sets, cfg, IrlTrainOptions{});
  for (std::size_t i = 1; i < fit.loglik_history.size(); ++i) {
    EXPECT_GE(fit.loglik_history[i], fit.loglik_history[i - 1]);
  }

  IrlModel zero = fit.model;
  zero.theta.assign(kNumFeatures, 0.0);
  for (double p : predict_irl(zero, samples[0], sets[0]).probs) EXPECT_NEAR(p, 0.25, 1e-15);

  auto twin = sets[0];
  twin.prototypes[2].trajectory = twin.prototypes[1].trajectory;
  const auto pt = predict_irl(fit.model, samples[0], twin);
  EXPECT_EQ(pt[1], pt[2]);

  // Independent softmax over the standardized features.
  const auto p = predict_irl(fit.model, samples[0], sets[0]);
  std::vector<double> neg;
  for (const auto& proto : sets[0].prototypes) {
    const auto f = features(proto.trajectory, samples[0], fit.model);
    double c = 0.0;
    for (std::size_t i = 0; i < kNumFeatures; ++i) c += fit.model.theta[i] * f[i];
    neg.push_back(-c);
  }
  const auto want = softmax(neg);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(p[j], want[j], 1e-12);

  const auto back = irl_model_from_json(to_json(fit.model, IrlTrainOptions{}, fit.loglik_history));
  EXPECT_EQ(back.theta, fit.model.theta);
  EXPECT_EQ(predict_irl(back, samples[0], sets[0]).probs, p.probs);
}
