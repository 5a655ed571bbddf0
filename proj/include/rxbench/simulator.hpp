#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include <json.hpp>

namespace rxbench::datagen {

struct IdmParams {
  double desired_gap = 2.0;        // s0, m
  double time_headway = 1.2;       // T, s
  double max_accel = 1.5;          // m/s^2
  double comfortable_decel = 2.0;  // m/s^2, positive
  double exponent = 4.0;
};

struct ScenarioConfig {
  double speed_limit = 15.0;  // m/s
  double ramp_start_x = 80.0;  // merging vehicle starts within 20 m after this
  double ramp_end_x = 200.0;   // m
  double lane_width = 3.7;    // m
  double dt = 0.1;
  double t_hist = 2.0;
  double t_h = 3.0;
  double episode_duration = 20.0;
  double sample_stride = 0.5;
  IdmParams idm;
  double yield_param_min = 0.0;
  double yield_param_max = 1.0;
  // Yield switching: p = y * sigmoid(scale * (y - 0.5) - deficit_weight * deficit + bias),
  // evaluated every decision_period seconds.
  double yield_logit_scale = 8.0;
  double yield_deficit_weight = 2.0;
  double yield_bias = 1.0;
  double decision_period = 0.5;
  // Merging vehicle behaviour.
  double nudge_offset = 1.5;  // lateral distance to the target lane centre while nudging, m
  double nudge_lead = 1.0;       // preferred rear gap ahead of the target front while nudging, m
  double nudge_max_brake = 1.0;  // m/s^2
  double nudge_lateral_speed = 0.6;
  double merge_lateral_speed = 1.0;
  double merge_gap = 4.0;        // accepted rear gap, m
  double abort_distance = 35.0;  // before ramp_end_x
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t steps(double seconds) const;
};

nlohmann::json to_json(const ScenarioConfig& c);
ScenarioConfig scenario_from_json(const nlohmann::json& j);

struct VehicleState {
  double x = 0.0;
  double v = 0.0;
  double a = 0.0;
  double y = 0.0;
  double length = 4.8;
  double width = 1.9;

  double front() const { return x + 0.5 * length; }
  double rear() const { return x - 0.5 * length; }
};

/// IDM acceleration clamped to [-2 * comfortable_decel, max_accel]. Without a
/// leader the interaction term is dropped.
double idm_accel(const IdmParams& p, double v, double v_desired, std::optional<double> gap,
                 double v_leader);

/// Constant-acceleration step with a stop at v = 0; stores the applied accel.
void advance(VehicleState& s, double accel, double dt);

bool lateral_overlap(const VehicleState& host, const VehicleState& target);
/// Host fully inside the target lane.
bool merge_complete(const VehicleState& host, const VehicleState& target, double lane_width);

enum class TargetMode { Normal, Yield };

/// Car-following law of the predicted vehicle with the stochastic yield switch.
class TargetController {
 public:
  TargetController(const ScenarioConfig& cfg, double yield_param, TargetMode mode)
      : cfg_(cfg), yield_param_(yield_param), mode_(mode) {}

  /// Acceleration at absolute step index `step`; may switch to Yield on a
  /// decision step.
  double accel(std::size_t step, const VehicleState& target, const VehicleState& host,
               const std::optional<VehicleState>& front, std::mt19937_64& rng);

  TargetMode mode() const { return mode_; }
  double yield_probability(const VehicleState& target, const VehicleState& host) const;

 private:
  const ScenarioConfig& cfg_;
  double yield_param_;
  TargetMode mode_;
};

}  // namespace rxbench::datagen
