#include <algorithm>
#include <cmath>

#include "rxbench/datagen.hpp"
#include "rxbench/error.hpp"
#include "rxbench/random.hpp"

namespace rxbench::datagen {

namespace {

bool is_multiple(double value, double step) {
  const double r = value / step;
  return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, std::abs(r));
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorKind::ConfigInvalid, what);
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

void ScenarioConfig::validate() const {
  auto finite_positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  require(finite_positive(speed_limit), "speed_limit must be positive");
  require(finite_positive(ramp_end_x), "ramp_end_x must be positive");
  require(std::isfinite(ramp_start_x) && ramp_start_x >= 0.0 && ramp_start_x < ramp_end_x,
          "ramp_start_x must lie before ramp_end_x");
  require(finite_positive(lane_width), "lane_width must be positive");
  require(finite_positive(dt), "dt must be positive");
  require(finite_positive(t_hist) && is_multiple(t_hist, dt), "t_hist must be a positive multiple of dt");
  require(finite_positive(t_h) && is_multiple(t_h, dt), "t_h must be a positive multiple of dt");
  require(finite_positive(sample_stride) && is_multiple(sample_stride, dt),
          "sample_stride must be a positive multiple of dt");
  require(finite_positive(decision_period) && is_multiple(decision_period, dt),
          "decision_period must be a positive multiple of dt");
  require(finite_positive(episode_duration) && is_multiple(episode_duration, dt),
          "episode_duration must be a positive multiple of dt");
  require(finite_positive(idm.desired_gap) && finite_positive(idm.time_headway) &&
              finite_positive(idm.max_accel) && finite_positive(idm.comfortable_decel) &&
              finite_positive(idm.exponent),
          "idm parameters must be positive");
  require(yield_param_min >= 0.0 && yield_param_max <= 1.0 && yield_param_min <= yield_param_max,
          "yield_param range must satisfy 0 <= min <= max <= 1");
  require(std::isfinite(yield_logit_scale) && std::isfinite(yield_deficit_weight) &&
              std::isfinite(yield_bias),
          "yield switch coefficients must be finite");
  require(finite_positive(nudge_offset) && finite_positive(nudge_lateral_speed) &&
              finite_positive(merge_lateral_speed) && finite_positive(merge_gap) &&
              finite_positive(abort_distance) && finite_positive(nudge_max_brake),
          "merging behaviour parameters must be positive");
  require(std::isfinite(nudge_lead), "nudge_lead must be finite");
}

std::size_t ScenarioConfig::steps(double seconds) const {
  return static_cast<std::size_t>(std::llround(seconds / dt));
}

nlohmann::json to_json(const ScenarioConfig& c) {
  return {
      {"speed_limit", c.speed_limit},
      {"ramp_start_x", c.ramp_start_x},
      {"ramp_end_x", c.ramp_end_x},
      {"lane_width", c.lane_width},
      {"dt", c.dt},
      {"t_hist", c.t_hist},
      {"t_h", c.t_h},
      {"episode_duration", c.episode_duration},
      {"sample_stride", c.sample_stride},
      {"idm",
       {{"desired_gap", c.idm.desired_gap},
        {"time_headway", c.idm.time_headway},
        {"max_accel", c.idm.max_accel},
        {"comfortable_decel", c.idm.comfortable_decel},
        {"exponent", c.idm.exponent}}},
      {"yield_param_range", {c.yield_param_min, c.yield_param_max}},
      {"yield_logit_scale", c.yield_logit_scale},
      {"yield_deficit_weight", c.yield_deficit_weight},
      {"yield_bias", c.yield_bias},
      {"decision_period", c.decision_period},
      {"nudge_offset", c.nudge_offset},
      {"nudge_lead", c.nudge_lead},
      {"nudge_max_brake", c.nudge_max_brake},
      {"nudge_lateral_speed", c.nudge_lateral_speed},
      {"merge_lateral_speed", c.merge_lateral_speed},
      {"merge_gap", c.merge_gap},
      {"abort_distance", c.abort_distance},
      {"seed", c.seed},
  };
}

ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  ScenarioConfig c;
  try {
    if (!j.is_object()) throw Error(ErrorKind::ConfigInvalid, "scenario must be an object");
    c.speed_limit = j.value("speed_limit", c.speed_limit);
    c.ramp_start_x = j.value("ramp_start_x", c.ramp_start_x);
    c.ramp_end_x = j.value("ramp_end_x", c.ramp_end_x);
    c.lane_width = j.value("lane_width", c.lane_width);
    c.dt = j.value("dt", c.dt);
    c.t_hist = j.value("t_hist", c.t_hist);
    c.t_h = j.value("t_h", c.t_h);
    c.episode_duration = j.value("episode_duration", c.episode_duration);
    c.sample_stride = j.value("sample_stride", c.sample_stride);
    if (j.contains("idm")) {
      const auto& idm = j.at("idm");
      c.idm.desired_gap = idm.value("desired_gap", c.idm.desired_gap);
      c.idm.time_headway = idm.value("time_headway", c.idm.time_headway);
      c.idm.max_accel = idm.value("max_accel", c.idm.max_accel);
      c.idm.comfortable_decel = idm.value("comfortable_decel", c.idm.comfortable_decel);
      c.idm.exponent = idm.value("exponent", c.idm.exponent);
    }
    if (j.contains("yield_param_range")) {
      const auto& r = j.at("yield_param_range");
      if (!r.is_array() || r.size() != 2) {
        throw Error(ErrorKind::ConfigInvalid, "yield_param_range must be [min, max]");
      }
      c.yield_param_min = r[0].get<double>();
      c.yield_param_max = r[1].get<double>();
    }
    c.yield_logit_scale = j.value("yield_logit_scale", c.yield_logit_scale);
    c.yield_deficit_weight = j.value("yield_deficit_weight", c.yield_deficit_weight);
    c.yield_bias = j.value("yield_bias", c.yield_bias);
    c.decision_period = j.value("decision_period", c.decision_period);
    c.nudge_offset = j.value("nudge_offset", c.nudge_offset);
    c.nudge_lead = j.value("nudge_lead", c.nudge_lead);
    c.nudge_max_brake = j.value("nudge_max_brake", c.nudge_max_brake);
    c.nudge_lateral_speed = j.value("nudge_lateral_speed", c.nudge_lateral_speed);
    c.merge_lateral_speed = j.value("merge_lateral_speed", c.merge_lateral_speed);
    c.merge_gap = j.value("merge_gap", c.merge_gap);
    c.abort_distance = j.value("abort_distance", c.abort_distance);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigInvalid, std::string("scenario: ") + e.what());
  }
  c.validate();
  return c;
}

double idm_accel(const IdmParams& p, double v, double v_desired, std::optional<double> gap,
                 double v_leader) {
  double a = p.max_accel * (1.0 - std::pow(std::max(v, 0.0) / v_desired, p.exponent));
  if (gap) {
    const double s = std::max(*gap, 0.1);
    const double dv = v - v_leader;
    const double s_star =
        p.desired_gap +
        std::max(0.0, v * p.time_headway + v * dv / (2.0 * std::sqrt(p.max_accel * p.comfortable_decel)));
    a -= p.max_accel * (s_star / s) * (s_star / s);
  }
  return std::clamp(a, -2.0 * p.comfortable_decel, p.max_accel);
}

void advance(VehicleState& s, double accel, double dt) {
  // A vehicle cannot reverse: braking that would overshoot v = 0 is cut short.
  accel = std::max(accel, -s.v / dt);
  s.a = accel;
  s.x += s.v * dt + 0.5 * accel * dt * dt;
  s.v = std::max(0.0, s.v + accel * dt);
}

bool lateral_overlap(const VehicleState& host, const VehicleState& target) {
  return std::abs(host.y - target.y) < 0.5 * (host.width + target.width);
}

bool merge_complete(const VehicleState& host, const VehicleState& target, double lane_width) {
  return std::abs(host.y - target.y) + 0.5 * host.width <= 0.5 * lane_width + 1e-9;
}

double TargetController::yield_probability(const VehicleState& target, const VehicleState& host) const {
  const double available = host.rear() - target.front();
  const double required = cfg_.idm.desired_gap + target.v * cfg_.idm.time_headway;
  const double deficit = std::clamp((required - available) / required, 0.0, 1.0);
  return yield_param_ * sigmoid(cfg_.yield_logit_scale * (yield_param_ - 0.5) -
                                cfg_.yield_deficit_weight * deficit + cfg_.yield_bias);
}

double TargetController::accel(std::size_t step, const VehicleState& target, const VehicleState& host,
                               const std::optional<VehicleState>& front, std::mt19937_64& rng) {
  const bool alongside = lateral_overlap(host, target) && host.front() > target.front() &&
                         !merge_complete(host, target, cfg_.lane_width);
  const std::size_t period = cfg_.steps(cfg_.decision_period);
  if (mode_ == TargetMode::Normal && alongside && step % period == 0) {
    if (uniform01(rng) < yield_probability(target, host)) mode_ = TargetMode::Yield;
  }
  const bool host_cutting_in = std::abs(host.y - target.y) < cfg_.nudge_offset - 0.05;
  const bool host_leads = lateral_overlap(host, target) && host.front() > target.front() &&
                          (mode_ == TargetMode::Yield || host_cutting_in);
  if (host_leads) {
    // Giving way is a deliberate deceleration, not an emergency stop: the
    // braking strength grows with the driver's willingness to yield.
    double a = idm_accel(cfg_.idm, target.v, cfg_.speed_limit, host.rear() - target.front(), host.v);
    a = std::max(a, -cfg_.idm.comfortable_decel * (0.5 + yield_param_));
    if (mode_ == TargetMode::Yield) {
      // Opening a gap only takes running slower than the merging vehicle.
      const double hold_speed = host.v - (1.0 + 2.0 * yield_param_);
      a = std::max(a, std::min(0.8 * (hold_speed - target.v), cfg_.idm.max_accel));
    }
    if (front) {
      a = std::min(a, idm_accel(cfg_.idm, target.v, cfg_.speed_limit, front->rear() - target.front(), front->v));
    }
    return a;
  }
  if (front) {
    return idm_accel(cfg_.idm, target.v, cfg_.speed_limit, front->rear() - target.front(), front->v);
  }
  return idm_accel(cfg_.idm, target.v, cfg_.speed_limit, std::nullopt, 0.0);
}

namespace {

enum class HostPhase { Nudge, Merge, Abort, MergeBehind, Done };

void record(Trajectory& traj, double t, const VehicleState& s) {
  traj.points.push_back({t, s.x, s.v, s.a, s.y});
}

double step_toward(double y, double goal, double rate, double dt) {
  return y + std::clamp(goal - y, -rate * dt, rate * dt);
}

// Braking needed to stop the front bumper at the end of the ramp.
double ramp_end_cap(const ScenarioConfig& cfg, const VehicleState& host) {
  const double dist = cfg.ramp_end_x - host.front();
  if (dist <= 0.0) return -2.0 * cfg.idm.comfortable_decel;
  const double needed = host.v * host.v / (2.0 * std::max(dist, 0.05));
  return needed > 0.5 * cfg.idm.comfortable_decel ? -needed : cfg.idm.max_accel;
}

}  // namespace

Episode simulate_episode(const ScenarioConfig& cfg, std::uint64_t seed, int episode_id,
                         std::optional<double> yield_param) {
  cfg.validate();
  if (yield_param && !(*yield_param >= 0.0 && *yield_param <= 1.0)) {
    throw Error(ErrorKind::ConfigInvalid, "yield_param must lie in [0, 1]");
  }
  std::mt19937_64 rng(splitmix64(seed));
  const auto& idm = cfg.idm;
  const double a_lo = -2.0 * idm.comfortable_decel;

  VehicleState host, target, front;
  for (VehicleState* s : {&host, &target, &front}) {
    s->length = uniform(rng, 4.3, 5.2);
    s->width = uniform(rng, 1.7, 2.0);
  }
  target.v = uniform(rng, 0.4, 0.7) * cfg.speed_limit;
  host.v = std::max(0.0, target.v + uniform(rng, -0.5, 1.0));
  front.v = target.v + uniform(rng, -0.5, 1.5);
  const double front_desired = std::min(cfg.speed_limit, front.v + uniform(rng, 0.0, 2.0));

  host.x = cfg.ramp_start_x + uniform(rng, 0.0, 20.0);
  host.y = -(cfg.nudge_offset + uniform(rng, 0.3, 1.2));
  const double rear_gap0 = uniform(rng, -3.0, 2.0);
  target.x = host.rear() - rear_gap0 - 0.5 * target.length;
  target.y = 0.0;
  front.x = host.front() + uniform(rng, 12.0, 25.0) + 0.5 * front.length;
  front.y = 0.0;

  Episode ep;
  ep.id = episode_id;
  ep.yield_param = yield_param ? *yield_param : uniform(rng, cfg.yield_param_min, cfg.yield_param_max);
  TargetController controller(cfg, *ep.yield_param, TargetMode::Normal);

  Trajectory th, tt, tf;
  const std::size_t n = cfg.steps(cfg.episode_duration);
  auto init = [&](Trajectory& traj, const VehicleState& s) {
    traj.dt = cfg.dt;
    traj.vehicle_length = s.length;
    traj.vehicle_width = s.width;
    traj.points.reserve(n + 1);
  };
  init(th, host);
  init(tt, target);
  init(tf, front);

  HostPhase phase = HostPhase::Nudge;
  const double nudge_y = target.y - cfg.nudge_offset;
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    const double rear_gap = host.rear() - target.front();
    const double front_gap = front.rear() - host.front();

    if ((phase == HostPhase::Merge || phase == HostPhase::MergeBehind) &&
        merge_complete(host, target, cfg.lane_width)) {
      ep.merge_success_time = t;
      ep.host_merged_ahead = phase == HostPhase::Merge;
      phase = HostPhase::Done;
    }
    if (phase == HostPhase::Nudge || phase == HostPhase::Abort) {
      const bool aligned = std::abs(host.y - nudge_y) <= 0.05;
      if (target.rear() > host.front() + 0.5) {
        phase = HostPhase::MergeBehind;
      } else if (aligned && rear_gap >= cfg.merge_gap && front_gap >= idm.desired_gap) {
        phase = HostPhase::Merge;
      } else if (phase == HostPhase::Nudge && controller.mode() == TargetMode::Normal &&
                 host.front() >= cfg.ramp_end_x - cfg.abort_distance) {
        phase = HostPhase::Abort;
        ep.aborted = true;
      }
    }

    const double a_front = idm_accel(idm, host.v, cfg.speed_limit, front_gap, front.v);
    double a_host = 0.0;
    double y_goal = nudge_y;
    double y_rate = cfg.nudge_lateral_speed;
    switch (phase) {
      case HostPhase::Nudge: {
        const double match = 0.5 * (target.v - host.v) + 0.1 * (rear_gap - cfg.nudge_lead);
        a_host = std::clamp(match, -cfg.nudge_max_brake, idm.max_accel);
        // A target that is visibly braking is read as giving way.
        if (target.a < -0.5) a_host = std::max(a_host, 0.0);
        a_host = std::min(a_host, a_front);
        break;
      }
      case HostPhase::Merge:
        a_host = a_front;
        y_goal = target.y;
        y_rate = cfg.merge_lateral_speed;
        break;
      case HostPhase::Abort:
        a_host = std::min(-idm.comfortable_decel, a_front);
        break;
      case HostPhase::MergeBehind: {
        a_host = std::min(a_front, idm_accel(idm, host.v, cfg.speed_limit,
                                             target.rear() - host.front(), target.v));
        if (host.front() < target.rear() - 0.5) {
          y_goal = target.y;
          y_rate = cfg.merge_lateral_speed;
        }
        break;
      }
      case HostPhase::Done: {
        const VehicleState& leader = ep.host_merged_ahead ? front : target;
        a_host = idm_accel(idm, host.v, cfg.speed_limit, leader.rear() - host.front(), leader.v);
        y_goal = target.y;
        y_rate = cfg.merge_lateral_speed;
        break;
      }
    }
    if (phase != HostPhase::Done) a_host = std::min(a_host, ramp_end_cap(cfg, host));
    a_host = std::clamp(a_host, a_lo, idm.max_accel);

    const bool was_yielding = controller.mode() == TargetMode::Yield;
    const double a_target = controller.accel(k, target, host, front, rng);
    if (!was_yielding && controller.mode() == TargetMode::Yield) ep.yield_onset_time = t;
    const double a_lead = idm_accel(idm, front.v, front_desired, std::nullopt, 0.0);

    host.a = std::max(a_host, -host.v / cfg.dt);
    target.a = std::max(a_target, -target.v / cfg.dt);
    front.a = std::max(a_lead, -front.v / cfg.dt);
    record(th, t, host);
    record(tt, t, target);
    record(tf, t, front);
    if (k == n) break;
    advance(host, host.a, cfg.dt);
    advance(target, target.a, cfg.dt);
    advance(front, front.a, cfg.dt);
    host.y = step_toward(host.y, y_goal, y_rate, cfg.dt);
  }
  ep.trajectories.emplace(kHostEntity, std::move(th));
  ep.trajectories.emplace(kTargetEntity, std::move(tt));
  ep.trajectories.emplace(kFrontEntity, std::move(tf));
  return ep;
}

}  // namespace rxbench::datagen
