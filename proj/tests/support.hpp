#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "rxbench/core.hpp"
#include "rxbench/metrics.hpp"
#include "rxbench/random.hpp"

namespace rxtest {

// Constant-acceleration trajectory sampled at dt, starting at t0.
inline rxbench::Trajectory ramp_traj(double x0, double v0, double a, std::size_t steps, double dt = 0.1,
                                     double y = 0.0, double t0 = 0.0) {
  rxbench::Trajectory tr;
  tr.dt = dt;
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    tr.points.push_back({t0 + t, x0 + v0 * t + 0.5 * a * t * t, v0 + a * t, a, y});
  }
  return tr;
}

inline rxbench::Trajectory const_traj(double x0, double v, std::size_t steps, double dt = 0.1, double y = 0.0,
                                      double t0 = 0.0) {
  return ramp_traj(x0, v, 0.0, steps, dt, y, t0);
}

// Random point of the probability simplex.
inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t m) {
  std::vector<double> p(m);
  double s = 0.0;
  for (auto& x : p) {
    x = -std::log(1.0 - rxbench::uniform01(rng));
    s += x;
  }
  for (auto& x : p) x /= s;
  return p;
}

inline rxbench::metrics::EvaluationRecord random_record(std::mt19937_64& rng, std::size_t m, int id) {
  rxbench::metrics::EvaluationRecord r;
  r.sample_id = id;
  r.gt_pattern = 1 + static_cast<int>(rng() % m);
  r.probs = random_simplex(rng, m);
  r.cr.resize(m);
  for (auto& c : r.cr) {
    // Mix of exact ties, zeros and continuous values.
    const auto kind = rng() % 4;
    c = kind == 0 ? 0.0 : kind == 1 ? 0.5 : rxbench::uniform(rng, 0.0, 10.0);
  }
  return r;
}

inline rxbench::metrics::EvaluationSet random_set(std::mt19937_64& rng, std::size_t n, std::size_t m = 4) {
  rxbench::metrics::EvaluationSet e;
  e.m = m;
  for (std::size_t i = 0; i < n; ++i) e.records.push_back(random_record(rng, m, static_cast<int>(i)));
  return e;
}

}  // namespace rxtest
