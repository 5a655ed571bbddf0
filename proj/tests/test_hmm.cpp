#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rxbench/datagen.hpp"
#include "rxbench/hmm.hpp"
#include "support.hpp"

using namespace rxbench;
using namespace rxbench::hmm;

namespace {

double normal_logpdf(double x, double mean, double var) {
  return -0.5 * std::log(2.0 * M_PI * var) - 0.5 * (x - mean) * (x - mean) / var;
}

GaussianHmm random_hmm(std::mt19937_64& rng, std::size_t h, std::size_t dim) {
  GaussianHmm m;
  m.n_states = h;
  m.initial = rxtest::random_simplex(rng, h);
  for (std::size_t i = 0; i < h; ++i) {
    const auto row = rxtest::random_simplex(rng, h);
    m.transition.insert(m.transition.end(), row.begin(), row.end());
    DiagGaussian g;
    for (std::size_t d = 0; d < dim; ++d) {
      g.mean.push_back(uniform(rng, -2.0, 2.0));
      g.var.push_back(uniform(rng, 0.3, 2.0));
    }
    m.emissions.push_back(g);
  }
  return m;
}

Sequence random_sequence(std::mt19937_64& rng, std::size_t t, std::size_t dim) {
  Sequence s(t, Observation(dim));
  for (auto& o : s) {
    for (auto& x : o) x = uniform(rng, -3.0, 3.0);
  }
  return s;
}

// Sum over every hidden path, in linear space.
double enumerate_loglik(const GaussianHmm& m, const Sequence& obs) {
  const std::size_t h = m.n_states, t = obs.size();
  std::vector<std::size_t> path(t, 0);
  double total = 0.0;
  while (true) {
    double p = m.initial[path[0]];
    for (std::size_t k = 0; k < t; ++k) {
      if (k > 0) p *= m.a(path[k - 1], path[k]);
      double ld = 0.0;
      for (std::size_t d = 0; d < obs[k].size(); ++d) {
        ld += normal_logpdf(obs[k][d], m.emissions[path[k]].mean[d], m.emissions[path[k]].var[d]);
      }
      p *= std::exp(ld);
    }
    total += p;
    std::size_t k = 0;
    while (k < t && ++path[k] == h) path[k++] = 0;
    if (k == t) break;
  }
  return std::log(total);
}

std::vector<Sequence> gaussian_sequences(std::mt19937_64& rng, std::size_t n, std::size_t t, double mean, double sd) {
  std::vector<Sequence> out(n, Sequence(t, Observation(1)));
  for (auto& s : out) {
    for (auto& o : s) o[0] = mean + sd * standard_normal(rng);
  }
  return out;
}

}  // namespace

TEST(Forward, SingleStateIsIidGaussian) {
  std::mt19937_64 rng(1);
  auto m = random_hmm(rng, 1, 2);
  const auto obs = random_sequence(rng, 7, 2);
  double want = 0.0;
  for (const auto& o : obs) {
    for (std::size_t d = 0; d < 2; ++d) want += normal_logpdf(o[d], m.emissions[0].mean[d], m.emissions[0].var[d]);
  }
  EXPECT_NEAR(forward_loglik(m, obs), want, 1e-10 * std::abs(want));
}

TEST(Forward, IdenticalEmissionsCollapse) {
  std::mt19937_64 rng(2);
  auto one = random_hmm(rng, 1, 2);
  auto two = random_hmm(rng, 2, 2);
  two.emissions = {one.emissions[0], one.emissions[0]};
  const auto obs = random_sequence(rng, 6, 2);
  EXPECT_NEAR(forward_loglik(two, obs), forward_loglik(one, obs), 1e-10);
}

TEST(Forward, MatchesPathEnumeration) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t h = 1 + rng() % 3, t = 1 + rng() % 6, dim = 1 + rng() % 2;
    const auto m = random_hmm(rng, h, dim);
    const auto obs = random_sequence(rng, t, dim);
    const double want = enumerate_loglik(m, obs);
    EXPECT_NEAR(forward_loglik(m, obs), want, 1e-10 * std::max(1.0, std::abs(want))) << "trial " << trial;
  }
}

TEST(Forward, DimensionMismatch) {
  std::mt19937_64 rng(4);
  const auto m = random_hmm(rng, 2, 2);
  try {
    forward_loglik(m, random_sequence(rng, 3, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
}

TEST(BaumWelch, LikelihoodNeverDecreases) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto gen = random_hmm(rng, 3, 2);
    std::vector<Sequence> data;
    for (int i = 0; i < 8; ++i) data.push_back(random_sequence(rng, 15, 2));
    data[0][0][0] += gen.emissions[0].mean[0];
    BaumWelchOptions opt;
    opt.n_states = 1 + seed % 3;
    opt.seed = seed;
    opt.max_iter = 40;
    opt.tol = 0.0;
    const auto res = baum_welch(data, opt);
    for (std::size_t i = 1; i < res.loglik_history.size(); ++i) {
      EXPECT_GE(res.loglik_history[i] - res.loglik_history[i - 1], -1e-9) << "seed " << seed << " iter " << i;
    }
    EXPECT_NO_THROW(res.model.validate());
  }
}

TEST(BaumWelch, RecoversSingleGaussianMean) {
  std::mt19937_64 rng(5);
  const auto data = gaussian_sequences(rng, 20, 25, 3.0, 2.0);
  BaumWelchOptions opt;
  opt.n_states = 1;
  const auto res = baum_welch(data, opt);
  double mean = 0.0, sq = 0.0;
  const double n = 500.0;
  for (const auto& s : data) {
    for (const auto& o : s) mean += o[0] / n;
  }
  for (const auto& s : data) {
    for (const auto& o : s) sq += (o[0] - mean) * (o[0] - mean) / n;
  }
  const double se = std::sqrt(sq / n);
  EXPECT_NEAR(res.model.emissions[0].mean[0], 3.0, 3.0 * se);
  EXPECT_NEAR(res.model.emissions[0].mean[0], mean, 1e-9);
  EXPECT_NEAR(res.model.emissions[0].var[0], sq, 1e-9);
}

TEST(BaumWelch, ConstantDataHitsVarianceFloor) {
  std::vector<Sequence> data(3, Sequence(10, Observation{1.5, -2.0}));
  BaumWelchOptions opt;
  opt.n_states = 2;
  const auto res = baum_welch(data, opt);
  for (const auto& e : res.model.emissions) {
    for (double v : e.var) EXPECT_NEAR(v, opt.var_floor, 1e-15);
    EXPECT_TRUE(std::isfinite(forward_loglik(res.model, data[0])));
  }
}

TEST(BaumWelch, TwoRegimesBeatOneOnHeldOut) {
  std::mt19937_64 rng(6);
  auto regime = [&](std::size_t n) {
    std::vector<Sequence> out;
    for (std::size_t i = 0; i < n; ++i) {
      Sequence s;
      const bool fast_first = rng() % 2;
      for (int k = 0; k < 20; ++k) {
        const bool fast = (k < 10) == fast_first;
        s.push_back({(fast ? 8.0 : 2.0) + 0.5 * standard_normal(rng)});
      }
      out.push_back(s);
    }
    return out;
  };
  const auto train = regime(30);
  const auto test = regime(10);
  BaumWelchOptions one, two;
  one.n_states = 1;
  two.n_states = 2;
  const auto m1 = baum_welch(train, one).model;
  const auto m2 = baum_welch(train, two).model;
  double l1 = 0.0, l2 = 0.0;
  for (const auto& s : test) {
    l1 += forward_loglik(m1, s);
    l2 += forward_loglik(m2, s);
  }
  EXPECT_GE(l2, l1);
}

TEST(BaumWelch, Deterministic) {
  std::mt19937_64 rng(7);
  std::vector<Sequence> data;
  for (int i = 0; i < 5; ++i) data.push_back(random_sequence(rng, 12, 2));
  const auto a = baum_welch(data, {});
  const auto b = baum_welch(data, {});
  EXPECT_EQ(a.model.transition, b.model.transition);
  EXPECT_EQ(a.loglik_history, b.loglik_history);
}

TEST(Gmm, DensityIsDirectSum) {
  std::mt19937_64 rng(8);
  std::vector<Observation> pts;
  for (int i = 0; i < 300; ++i) {
    const double c = (i % 2) ? 4.0 : -1.0;
    pts.push_back({c + standard_normal(rng), 0.5 * standard_normal(rng)});
  }
  GmmOptions opt;
  opt.n_components = 2;
  const auto g = fit_gmm(pts, opt);
  double wsum = 0.0;
  for (double w : g.weights) wsum += w;
  EXPECT_NEAR(wsum, 1.0, 1e-12);
  const Observation x{0.3, -0.2};
  double direct = 0.0;
  for (std::size_t k = 0; k < g.weights.size(); ++k) {
    double ld = 0.0;
    for (std::size_t d = 0; d < 2; ++d) ld += normal_logpdf(x[d], g.components[k].mean[d], g.components[k].var[d]);
    direct += g.weights[k] * std::exp(ld);
  }
  EXPECT_NEAR(g.density(x), direct, 1e-12 * direct);
}

namespace {

HmmPredictorModel hand_model(std::size_t k, std::mt19937_64& rng) {
  HmmPredictorModel m;
  for (std::size_t s = 0; s < k; ++s) {
    SituationModel sm;
    sm.situation_id = static_cast<int>(s) + 1;
    sm.hmm = random_hmm(rng, 2, 4);
    sm.gmm.weights = {0.4, 0.6};
    for (int c = 0; c < 2; ++c) {
      DiagGaussian g;
      for (int d = 0; d < 3; ++d) {
        g.mean.push_back(uniform(rng, 0.0, 30.0));
        g.var.push_back(uniform(rng, 20.0, 60.0));
      }
      sm.gmm.components.push_back(g);
    }
    m.situations.push_back(sm);
  }
  return m;
}

SceneSample scene() {
  datagen::ScenarioConfig cfg;
  const auto ep = datagen::simulate_episode(cfg, 42, 42);
  return datagen::window_samples(ep, cfg, default_patterns(), protogen::PlannerLimits{}).front();
}

}  // namespace

TEST(Predictor, SingleSituationIsNormalizedDensity) {
  std::mt19937_64 rng(9);
  const auto m = hand_model(1, rng);
  const auto s = scene();
  const auto set = protogen::generate_prototypes(s, default_patterns(), protogen::PlannerLimits{});
  const auto p = predict_hmm(m, s, set);
  std::vector<double> f;
  double total = 0.0;
  for (const auto& proto : set.prototypes) {
    f.push_back(m.situations[0].gmm.density(trajectory_descriptor(proto.trajectory, set.horizon)));
    total += f.back();
  }
  for (std::size_t j = 0; j < f.size(); ++j) EXPECT_NEAR(p[j], f[j] / total, 1e-12);
}

TEST(Predictor, TwoSituationsMatchDirectFormula) {
  std::mt19937_64 rng(10);
  const auto m = hand_model(2, rng);
  const auto s = scene();
  const auto set = protogen::generate_prototypes(s, default_patterns(), protogen::PlannerLimits{});
  const auto obs = observation_sequence(s);
  const double l1 = forward_loglik(m.situations[0].hmm, obs), l2 = forward_loglik(m.situations[1].hmm, obs);
  const double p1 = 1.0 / (1.0 + std::exp(l2 - l1)), p2 = 1.0 - p1;
  const auto post = situation_posterior(m, s);
  EXPECT_NEAR(post[0], p1, 1e-12);
  std::vector<double> num;
  double total = 0.0;
  for (const auto& proto : set.prototypes) {
    const auto d = trajectory_descriptor(proto.trajectory, set.horizon);
    num.push_back(p1 * m.situations[0].gmm.density(d) + p2 * m.situations[1].gmm.density(d));
    total += num.back();
  }
  const auto p = predict_hmm(m, s, set);
  for (std::size_t j = 0; j < num.size(); ++j) EXPECT_NEAR(p[j], num[j] / total, 1e-12);
}

TEST(Predictor, IdenticalPrototypesGiveUniform) {
  std::mt19937_64 rng(11);
  const auto m = hand_model(2, rng);
  const auto s = scene();
  auto set = protogen::generate_prototypes(s, default_patterns(), protogen::PlannerLimits{});
  for (auto& p : set.prototypes) p.trajectory = set.prototypes[0].trajectory;
  const auto p = predict_hmm(m, s, set);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(p[j], 0.25, 1e-15);
}

TEST(Predictor, FitOnSimulatedDataAndRoundTrip) {
  datagen::ScenarioConfig cfg;
  std::vector<SceneSample> samples;
  for (int id = 1; id <= 12; ++id) {
    const auto ep = datagen::simulate_episode(cfg, splitmix64(static_cast<std::uint64_t>(id)), id);
    const auto w = datagen::window_samples(ep, cfg, default_patterns(), protogen::PlannerLimits{});
    samples.insert(samples.end(), w.begin(), w.end());
  }
  BaumWelchOptions bw;
  bw.max_iter = 20;
  const auto m = fit_hmm_predictor(samples, bw, GmmOptions{});
  ASSERT_EQ(m.situations.size(), 2u);
  const auto back = hmm_model_from_json(to_json(m));
  const auto set = protogen::generate_prototypes(samples[0], default_patterns(), protogen::PlannerLimits{});
  const auto a = predict_hmm(m, samples[0], set);
  const auto b = predict_hmm(back, samples[0], set);
  EXPECT_NO_THROW(validate_distribution(a));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(a[j], b[j]);
}
