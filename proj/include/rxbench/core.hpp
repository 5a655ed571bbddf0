#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rxbench/error.hpp"

namespace rxbench {

inline constexpr double kProbabilityTolerance = 1e-9;

// Entity roles inside a scene.
inline constexpr int kHostEntity = 0;
inline constexpr int kTargetEntity = 1;
inline constexpr int kFrontEntity = 2;

/// Longitudinal kinematic state of one vehicle at one instant.
///
/// `x` is the position of the vehicle centre along the lane centreline and
/// `y` its lateral offset (target lane centreline at y = 0, ramp side negative).
/// `a` is the acceleration applied over the interval that starts at `t`.
struct TrajectoryPoint {
  double t = 0.0;
  double x = 0.0;
  double v = 0.0;
  double a = 0.0;
  double y = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  double dt = 0.1;
  double vehicle_length = 4.8;
  double vehicle_width = 1.9;

  std::size_t size() const { return points.size(); }
  const TrajectoryPoint& front() const { return points.front(); }
  const TrajectoryPoint& back() const { return points.back(); }
  double duration() const { return points.empty() ? 0.0 : points.back().t - points.front().t; }

  double front_x(std::size_t i) const { return points[i].x + 0.5 * vehicle_length; }
  double rear_x(std::size_t i) const { return points[i].x - 0.5 * vehicle_length; }

  /// Linear interpolation of the state at time t (clamped to the span).
  TrajectoryPoint interpolate(double t) const;
};

/// Checks the structural invariants (|points| >= 2, fixed dt, v >= 0) and the
/// finite-difference consistency |x' - x - v dt| <= 0.5 a_bound dt^2.
/// Throws Error(InvalidArgument) naming the offending index.
void validate_trajectory(const Trajectory& traj, double a_bound);

enum class PatternLabel { HardYield, Yield, KeepGap, CloseGap };

const char* to_string(PatternLabel label);

struct MotionPattern {
  int id = 1;  // 1..M
  PatternLabel label = PatternLabel::KeepGap;
  double terminal_speed_factor = 1.0;
  // Terminal position offset (m) applied when the prototype set collapses.
  double terminal_gap_target = 0.0;

  bool is_yielding() const {
    return label == PatternLabel::HardYield || label == PatternLabel::Yield;
  }
};

/// The four-pattern taxonomy, ordered from least to most aggressive.
std::vector<MotionPattern> default_patterns();

/// Ids must cover 1..M exactly with M >= 2 and labels must be ordered by
/// aggressiveness.
void validate_patterns(std::span<const MotionPattern> patterns);

struct SceneSample {
  int sample_id = 0;
  int episode_id = 0;
  double t0 = 0.0;  // last history timestamp
  std::map<int, Trajectory> history;
  Trajectory future_host;
  Trajectory future_predicted;
  std::optional<Trajectory> future_front;
  int gt_pattern = 1;  // 1..M
  int situation = 1;   // 1: host merges ahead of target, 2: target passes first
  double horizon = 3.0;

  int n_entities() const { return static_cast<int>(history.size()); }
  const Trajectory& host_history() const;
  const Trajectory& target_history() const;
  const Trajectory* front_history() const;
};

struct PredictionDistribution {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t j) const { return probs[j]; }
};

/// Throws Error(InvalidArgument) if any entry is outside [0,1] or the sum is
/// off by more than kProbabilityTolerance.
void validate_distribution(const PredictionDistribution& dist);

/// Normalizes a vector of log-weights into a distribution (max-subtracted).
PredictionDistribution softmax(std::span<const double> log_weights);

double log_sum_exp(std::span<const double> values);

/// Row-major M0 x M1 table of joint pattern probabilities.
struct JointTable {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Conditions a joint host/target pattern table on the host pattern (0-based
/// row). Requires a normalized joint; throws ZeroMarginal for an empty row.
PredictionDistribution situation_to_reaction(const JointTable& joint, std::size_t host_pattern);

/// Same conditional, accepting any non-negative table regardless of its total.
PredictionDistribution situation_to_reaction_unnormalized(const JointTable& joint,
                                                          std::size_t host_pattern);

/// One-hot vector at gt_pattern (1-based). Throws PatternOutOfRange.
std::vector<double> outcome_vector(const SceneSample& sample, std::size_t m);
std::vector<double> outcome_vector(int gt_pattern, std::size_t m);

}  // namespace rxbench
