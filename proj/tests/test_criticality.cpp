#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "rxbench/criticality.hpp"
#include "rxbench/datagen.hpp"
#include "support.hpp"

using namespace rxbench;
using namespace rxbench::criticality;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Independent per-pair criticality: host rear from first overlap on, projected
// contact time at every sample, written without the library's helpers.
double oracle_cr(const Trajectory& host, const Trajectory& target, double cr_max) {
  const std::size_t n = std::min(host.size(), target.size());
  const double half = 0.5 * (host.vehicle_width + target.vehicle_width);
  bool entered = false, positive_seen = false;
  double best = kInf;
  for (std::size_t k = 0; k < n; ++k) {
    entered = entered || std::abs(host.points[k].y - target.points[k].y) < half;
    if (!entered) continue;
    const double elapsed = target.points[k].t - target.points[0].t;
    const double gap = (host.points[k].x - 0.5 * host.vehicle_length) -
                       (target.points[k].x + 0.5 * target.vehicle_length);
    if (gap <= 0.0) {
      if (positive_seen) {
        best = std::min(best, elapsed);
        break;
      }
      continue;
    }
    positive_seen = true;
    const double closing = target.points[k].v - host.points[k].v;
    if (closing > 0.0) best = std::min(best, elapsed + gap / closing);
  }
  if (std::isinf(best)) return 0.0;
  if (best <= 0.0) return cr_max;
  return std::min(1.0 / best, cr_max);
}

}  // namespace

TEST(MergePoint, NoOverlapGivesNone) {
  const auto host = rxtest::const_traj(50.0, 10.0, 30, 0.1, -3.7);
  const auto target = rxtest::const_traj(20.0, 10.0, 30);
  EXPECT_FALSE(merge_point(host, target).has_value());
  EXPECT_TRUE(std::isinf(ttc(target, merge_track(host, target))));
}

TEST(MergePoint, AlreadyOverlappingUsesCurrentRear) {
  auto host = rxtest::const_traj(42.0 + 2.4, 10.0, 30, 0.1, 0.5);
  host.vehicle_length = 4.8;
  const auto target = rxtest::const_traj(0.0, 10.0, 30);
  const auto mp = merge_point(host, target);
  ASSERT_TRUE(mp.has_value());
  EXPECT_NEAR(*mp, 42.0, 1e-12);
}

TEST(MergePoint, CrossingMatchesDenseScan) {
  std::mt19937_64 rng(7);
  int crossings = 0;
  for (int trial = 0; trial < 200; ++trial) {
    // Host drifts laterally from the ramp toward the lane while changing speed.
    auto host = rxtest::ramp_traj(uniform(rng, 0.0, 40.0), uniform(rng, 2.0, 15.0), uniform(rng, -1.5, 1.5), 30);
    const double y0 = uniform(rng, -4.5, -2.5), lat = uniform(rng, 0.3, 2.0);
    for (auto& p : host.points) p.y = y0 + lat * p.t;
    const auto target = rxtest::const_traj(0.0, 10.0, 30);
    const auto mp = merge_point(host, target);
    if (!mp || bodies_overlap(host, target, 0)) continue;
    // Dense scan at dt/100 with linearly interpolated states.
    const double half = 0.5 * (host.vehicle_width + target.vehicle_width);
    std::optional<double> scan;
    for (int i = 0; i <= 3000 && !scan; ++i) {
      const double t = host.front().t + i * 0.001;
      const auto h = host.interpolate(t);
      const auto g = target.interpolate(t);
      if (std::abs(h.y - g.y) < half) scan = h.x - 0.5 * host.vehicle_length;
    }
    ASSERT_TRUE(scan.has_value());
    // Speed at most 20 m/s over one scan step.
    EXPECT_NEAR(*mp, *scan, 0.001 * 20.0 + 1e-9) << "trial " << trial;
    ++crossings;
  }
  EXPECT_GT(crossings, 50);
}

TEST(Ttc, ConstantSpeedClosedForm) {
  // Front at 30 m: centre 27.6 with a 4.8 m body.
  auto target = rxtest::const_traj(27.6, 10.0, 30);
  EXPECT_NEAR(ttc(target, std::optional<double>(50.0)), 2.0, 1e-12);
  EXPECT_NEAR(criticality_from_ttc(2.0, kDefaultCrMax), 0.5, 1e-15);
}

TEST(Ttc, MovingMergePointUsesClosingSpeed) {
  const auto target = rxtest::const_traj(27.6, 12.0, 30);
  const auto host = rxtest::const_traj(52.4, 8.0, 30, 0.1, 0.0);  // rear at 50 m
  // Gap 20 m closing at 4 m/s.
  EXPECT_NEAR(ttc(target, merge_track(host, target)), 5.0, 1e-12);
}

TEST(Ttc, DeceleratingAwayNeverCloses) {
  const auto target = rxtest::ramp_traj(27.6, 0.0, 0.0, 30);
  EXPECT_TRUE(std::isinf(ttc(target, std::optional<double>(50.0))));
  const auto slowing = rxtest::ramp_traj(0.0, 8.0, -2.0, 30);
  const auto host = rxtest::const_traj(30.0, 10.0, 30, 0.1, 0.0);
  EXPECT_TRUE(std::isinf(ttc(slowing, merge_track(host, slowing))));
  EXPECT_TRUE(std::isinf(ttc(slowing, std::nullopt)));
}

TEST(Ttc, AcceleratingTargetMatchesDenseScan) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const double v0 = uniform(rng, 5.0, 15.0), a = uniform(rng, 0.2, 2.0), merge_x = uniform(rng, 20.0, 45.0);
    const auto target = rxtest::ramp_traj(0.0, v0, a, 30);
    // Dense scan for the first instant the front reaches the merging point.
    double contact = kInf;
    for (int i = 0; i <= 300000; ++i) {
      const double t = i * 1e-5;
      if (v0 * t + 0.5 * a * t * t + 2.4 >= merge_x) {
        contact = t;
        break;
      }
    }
    const double got = ttc(target, std::optional<double>(merge_x));
    if (std::isinf(contact)) {
      // Beyond the horizon: the projection still bounds the arrival from above.
      EXPECT_TRUE(std::isfinite(got));
      EXPECT_GT(got, 2.9);
      continue;
    }
    EXPECT_GE(got, contact - 1e-4);
    EXPECT_LE(got, contact + 0.1 + 1e-9);
  }
}

TEST(Ttc, TargetReachingMergePointCapsAtElapsed) {
  const auto target = rxtest::const_traj(27.6, 10.0, 30);
  // Merging point behind the target after 0.5 s: contact already occurred.
  std::vector<MergeState> track(31, MergeState{true, 35.0, 0.0});
  EXPECT_NEAR(ttc(target, track), 0.5, 1e-12);
  // Already ahead at the start and never behind: no closing instant counts.
  std::vector<MergeState> behind(31, MergeState{true, 10.0, 0.0});
  EXPECT_TRUE(std::isinf(ttc(target, behind)));
}

TEST(Criticality, ReciprocalAndClamp) {
  const std::vector<double> t{10.0, 5.0, 2.0, 1.0};
  const std::vector<double> want{0.1, 0.2, 0.5, 1.0};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(criticality_from_ttc(t[i], 10.0), want[i], 1e-15);
  EXPECT_DOUBLE_EQ(criticality_from_ttc(kInf, 10.0), 0.0);
  EXPECT_DOUBLE_EQ(criticality_from_ttc(0.01, 10.0), 10.0);
  EXPECT_DOUBLE_EQ(criticality_from_ttc(0.0, 10.0), 10.0);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double a = uniform(rng, 0.0, 20.0), b = uniform(rng, 0.0, 20.0);
    if (a < b) {
      EXPECT_GE(criticality_from_ttc(a, 10.0), criticality_from_ttc(b, 10.0));
    }
    const double c = criticality_from_ttc(a, 10.0);
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 10.0);
  }
}

TEST(Criticality, ProfileOrderAndIndex) {
  const auto zero = make_profile({0, 0, 0, 0}, 2);
  EXPECT_EQ(zero.m_index, 0);
  EXPECT_EQ(zero.order, (std::vector<int>{1, 2, 3, 4}));
  const auto p = make_profile({0.5, 0.1, 1.0, 0.2}, 1);
  EXPECT_EQ(p.order, (std::vector<int>{2, 4, 1, 3}));
  EXPECT_EQ(p.m_index, 2);
  EXPECT_DOUBLE_EQ(p.cr_gt, 0.5);
  EXPECT_THROW(make_profile({0.1, 0.2}, 3), Error);
}

TEST(Criticality, NeverClosingPrototypesGiveZeros) {
  SceneSample s;
  s.future_host = rxtest::const_traj(0.0, 10.0, 30, 0.1, -3.7);
  protogen::PrototypeSet set;
  for (int j = 1; j <= 4; ++j) set.prototypes.push_back({j, rxtest::const_traj(20.0, 5.0 + j, 30), false, false});
  s.gt_pattern = 3;
  const auto prof = criticality_profile(s, set);
  EXPECT_EQ(prof.cr, (std::vector<double>{0, 0, 0, 0}));
  EXPECT_EQ(prof.m_index, 0);
}

TEST(Criticality, SimulatedProfilesMatchPerPairOracle) {
  datagen::ScenarioConfig cfg;
  int nonzero = 0;
  for (std::uint64_t seed : {42u, 7u, 3u, 11u}) {
    const auto ep = datagen::simulate_episode(cfg, seed, static_cast<int>(seed));
    const auto samples = datagen::window_samples(ep, cfg, default_patterns(), protogen::PlannerLimits{});
    for (const auto& s : samples) {
      const auto set = protogen::generate_prototypes(s, default_patterns(), protogen::PlannerLimits{});
      const auto prof = criticality_profile(s, set, 10.0);
      for (int j = 1; j <= 4; ++j) {
        const double want = oracle_cr(s.future_host, set.trajectory(j), 10.0);
        EXPECT_NEAR(prof.cr[j - 1], want, 1e-12) << "sample " << s.sample_id << " pattern " << j;
        if (want > 0.0) ++nonzero;
      }
    }
  }
  EXPECT_GT(nonzero, 0);
}
