#include "rxbench/protogen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rxbench::protogen {

void PlannerLimits::validate() const {
  if (!(a_min < 0.0 && a_max > 0.0 && v_max > 0.0 && j_max > 0.0)) {
    throw Error(ErrorKind::ConfigInvalid, "planner limits need a_min < 0 < a_max, v_max > 0, j_max > 0");
  }
}

QuinticPolynomial QuinticPolynomial::solve(double x0, double v0, double a0, double x1, double v1,
                                           double a1, double duration) {
  if (!(duration > 0.0)) throw Error(ErrorKind::InvalidArgument, "quintic duration must be positive");
  const double T = duration;
  const double T2 = T * T;
  const double T3 = T2 * T;
  // Residuals after the part fixed by the initial conditions.
  const double h = x1 - (x0 + v0 * T + 0.5 * a0 * T2);
  const double dv = v1 - (v0 + a0 * T);
  const double da = a1 - a0;
  std::array<double, 6> c{};
  c[0] = x0;
  c[1] = v0;
  c[2] = 0.5 * a0;
  c[3] = (20.0 * h - 8.0 * dv * T + da * T2) / (2.0 * T3);
  c[4] = (-30.0 * h + 14.0 * dv * T - 2.0 * da * T2) / (2.0 * T3 * T);
  c[5] = (12.0 * h - 6.0 * dv * T + da * T2) / (2.0 * T3 * T2);
  return QuinticPolynomial(c);
}

double QuinticPolynomial::position(double t) const {
  return c_[0] + t * (c_[1] + t * (c_[2] + t * (c_[3] + t * (c_[4] + t * c_[5]))));
}

double QuinticPolynomial::velocity(double t) const {
  return c_[1] + t * (2.0 * c_[2] + t * (3.0 * c_[3] + t * (4.0 * c_[4] + t * 5.0 * c_[5])));
}

double QuinticPolynomial::acceleration(double t) const {
  return 2.0 * c_[2] + t * (6.0 * c_[3] + t * (12.0 * c_[4] + t * 20.0 * c_[5]));
}

double QuinticPolynomial::jerk(double t) const {
  return 6.0 * c_[3] + t * (24.0 * c_[4] + t * 60.0 * c_[5]);
}

const Trajectory& PrototypeSet::trajectory(int pattern_id) const {
  if (pattern_id < 1 || static_cast<std::size_t>(pattern_id) > prototypes.size()) {
    throw Error(ErrorKind::PatternOutOfRange, "no prototype for pattern " + std::to_string(pattern_id));
  }
  return prototypes[static_cast<std::size_t>(pattern_id - 1)].trajectory;
}

bool respects_limits(const Trajectory& traj, const PlannerLimits& limits, double tol) {
  return std::all_of(traj.points.begin(), traj.points.end(), [&](const TrajectoryPoint& p) {
    return p.a >= limits.a_min - tol && p.a <= limits.a_max + tol && p.v >= -tol &&
           p.v <= limits.v_max + tol;
  });
}

double min_front_gap(const Trajectory& traj, const FrontVehicle& front, double t0) {
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    gap = std::min(gap, front.rear_at(traj.points[i].t - t0) - traj.front_x(i));
  }
  return gap;
}

double min_pairwise_separation(const PrototypeSet& set) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (std::size_t j = i + 1; j < set.size(); ++j) {
      const auto& a = set.prototypes[i].trajectory.points;
      const auto& b = set.prototypes[j].trajectory.points;
      double sep = 0.0;
      for (std::size_t k = 0; k < std::min(a.size(), b.size()); ++k) {
        sep = std::max(sep, std::abs(a[k].x - b[k].x));
      }
      best = std::min(best, sep);
    }
  }
  return best;
}

namespace {

constexpr double kSafetyMargin = 0.02;

struct PlanContext {
  const InitialState& state;
  const std::optional<FrontVehicle>& front;
  const PlannerLimits& limits;
  double horizon;
  double dt;
  std::size_t steps;
};

Trajectory make_trajectory(const PlanContext& ctx) {
  Trajectory traj;
  traj.dt = ctx.dt;
  traj.vehicle_length = ctx.state.length;
  traj.vehicle_width = ctx.state.width;
  traj.points.reserve(ctx.steps + 1);
  return traj;
}

Trajectory sample_quintic(const PlanContext& ctx, const QuinticPolynomial& q) {
  Trajectory traj = make_trajectory(ctx);
  for (std::size_t k = 0; k <= ctx.steps; ++k) {
    const double tau = static_cast<double>(k) * ctx.dt;
    traj.points.push_back({ctx.state.t0 + tau, q.position(tau), q.velocity(tau), q.acceleration(tau),
                           ctx.state.y});
  }
  return traj;
}

bool jerk_within(const PlanContext& ctx, const QuinticPolynomial& q) {
  for (std::size_t k = 0; k <= ctx.steps; ++k) {
    if (std::abs(q.jerk(static_cast<double>(k) * ctx.dt)) > ctx.limits.j_max + 1e-9) return false;
  }
  return true;
}

// Remaining safety budget after braking at a_min down to the front speed.
double safety_slack(double gap, double v, double v_front, double a_min) {
  const double closing = std::max(0.0, v - v_front);
  return gap - closing * closing / (2.0 * -a_min);
}

struct TrackResult {
  Trajectory trajectory;
  bool unsafe = false;
};

// Forward-integrates a limit-respecting trajectory that tracks the quintic's
// velocity profile. With `front` set, every step keeps a braking-safe gap.
TrackResult track_with_limits(const PlanContext& ctx, const QuinticPolynomial& q, const FrontVehicle* front) {
  const auto& lim = ctx.limits;
  TrackResult out{make_trajectory(ctx), false};
  double x = ctx.state.x;
  double v = std::clamp(ctx.state.v, 0.0, lim.v_max);
  double a_prev = std::clamp(ctx.state.a, lim.a_min, lim.a_max);
  const double dt = ctx.dt;
  const double half_len = 0.5 * ctx.state.length;

  for (std::size_t k = 0; k < ctx.steps; ++k) {
    const double tau_next = static_cast<double>(k + 1) * dt;
    double a = (q.velocity(tau_next) - v) / dt;
    a = std::clamp(a, a_prev - lim.j_max * dt, a_prev + lim.j_max * dt);
    a = std::clamp(a, lim.a_min, lim.a_max);
    a = std::min(a, (lim.v_max - v) / dt);
    const double a_floor = std::max(lim.a_min, -v / dt);
    a = std::max(a, a_floor);

    if (front != nullptr) {
      auto slack_after = [&](double acc) {
        const double x_next = x + v * dt + 0.5 * acc * dt * dt;
        const double v_next = std::max(0.0, v + acc * dt);
        const double gap = front->rear_at(tau_next) - (x_next + half_len);
        return safety_slack(gap, v_next, front->v, lim.a_min);
      };
      const double target = kMinFrontGap + kSafetyMargin;
      if (slack_after(a) < target) {
        if (slack_after(a_floor) < target) {
          a = a_floor;
          if (slack_after(a_floor) < kMinFrontGap) out.unsafe = true;
        } else {
          double lo = a_floor;  // safe
          double hi = a;        // unsafe
          for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (slack_after(mid) >= target ? lo : hi) = mid;
          }
          a = lo;
        }
      }
    }

    out.trajectory.points.push_back({ctx.state.t0 + static_cast<double>(k) * dt, x, v, a, ctx.state.y});
    x += v * dt + 0.5 * a * dt * dt;
    v = std::clamp(v + a * dt, 0.0, lim.v_max);
    a_prev = a;
  }
  out.trajectory.points.push_back(
      {ctx.state.t0 + static_cast<double>(ctx.steps) * dt, x, v, a_prev, ctx.state.y});
  return out;
}

Prototype plan_pattern(const PlanContext& ctx, const MotionPattern& pattern, bool apply_offset) {
  const auto& s = ctx.state;
  const double T = ctx.horizon;
  const double v_end = std::clamp(pattern.terminal_speed_factor * s.v, 0.0, ctx.limits.v_max);
  double x_end = s.x + 0.5 * T * (s.v + v_end);
  if (apply_offset) x_end += pattern.terminal_gap_target;
  const auto q = QuinticPolynomial::solve(s.x, s.v, s.a, x_end, v_end, 0.0, T);

  Prototype proto;
  proto.pattern_id = pattern.id;
  proto.trajectory = sample_quintic(ctx, q);

  const bool limits_ok = respects_limits(proto.trajectory, ctx.limits) && jerk_within(ctx, q);
  const FrontVehicle* guard = (pattern.is_yielding() && ctx.front) ? &*ctx.front : nullptr;
  const bool gap_ok = guard == nullptr || min_front_gap(proto.trajectory, *guard, s.t0) >= kMinFrontGap;
  if (limits_ok && gap_ok) return proto;

  auto tracked = track_with_limits(ctx, q, guard);
  proto.trajectory = std::move(tracked.trajectory);
  proto.infeasible = !limits_ok || tracked.unsafe;
  proto.collision_constrained = !gap_ok;
  return proto;
}

}  // namespace

PrototypeSet generate_prototypes(const InitialState& state, const std::optional<FrontVehicle>& front,
                                 std::span<const MotionPattern> patterns, const PlannerLimits& limits,
                                 double horizon, double dt, int sample_id) {
  limits.validate();
  validate_patterns(patterns);
  if (!(dt > 0.0) || !(horizon > 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon and dt must be positive");
  if (state.v < 0.0 || state.v > limits.v_max + 1e-9) {
    throw Error(ErrorKind::InvalidArgument, "current speed outside [0, v_max]");
  }
  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
  const PlanContext ctx{state, front, limits, horizon, dt, steps};

  auto build = [&](bool offsets) {
    PrototypeSet set;
    set.generated_for = sample_id;
    set.horizon = horizon;
    set.degenerate = offsets;
    set.prototypes.reserve(patterns.size());
    for (const auto& p : patterns) set.prototypes.push_back(plan_pattern(ctx, p, offsets));
    return set;
  };

  PrototypeSet set = build(false);
  if (min_pairwise_separation(set) < kMinPairwiseSeparation) set = build(true);
  return set;
}

PrototypeSet generate_prototypes(const SceneSample& sample, std::span<const MotionPattern> patterns,
                                 const PlannerLimits& limits) {
  const Trajectory& target = sample.target_history();
  if (target.points.empty()) throw Error(ErrorKind::InvalidArgument, "empty target history");
  const auto& last = target.back();
  InitialState state{last.t, last.x, last.v, last.a, last.y, target.vehicle_length, target.vehicle_width};
  state.v = std::min(state.v, limits.v_max);
  std::optional<FrontVehicle> front;
  if (const Trajectory* f = sample.front_history(); f != nullptr && !f->points.empty()) {
    front = FrontVehicle{f->back().x, f->back().v, f->vehicle_length};
  }
  return generate_prototypes(state, front, patterns, limits, sample.horizon, target.dt, sample.sample_id);
}

double rms_distance(const Trajectory& a, const Trajectory& b) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n == 0) return std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = a.points[k].x - b.points[k].x;
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(n));
}

int label_ground_truth(const Trajectory& future, const PrototypeSet& protos) {
  int best_id = 1;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : protos.prototypes) {
    const double d = rms_distance(future, p.trajectory);
    // Near-equal distances count as ties and keep the lower id.
    if (std::isinf(best) ? d < best : d < best - 1e-12 * std::max(1.0, best)) {
      best = d;
      best_id = p.pattern_id;
    }
  }
  return best_id;
}

int label_ground_truth(const SceneSample& sample, const PrototypeSet& protos) {
  return label_ground_truth(sample.future_predicted, protos);
}

}  // namespace rxbench::protogen
