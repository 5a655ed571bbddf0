#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "rxbench/core.hpp"

namespace rxbench::protogen {

struct PlannerLimits {
  double a_min = -6.0;  // m/s^2
  double a_max = 3.0;   // m/s^2
  double v_max = 40.0;  // m/s
  double j_max = 15.0;  // m/s^3

  void validate() const;
};

/// x(t) = sum c_i t^i on [0, T].
class QuinticPolynomial {
 public:
  QuinticPolynomial() = default;
  explicit QuinticPolynomial(const std::array<double, 6>& coeffs) : c_(coeffs) {}

  /// Boundary-value solution matching (x, v, a) at t = 0 and t = T.
  static QuinticPolynomial solve(double x0, double v0, double a0, double x1, double v1, double a1,
                                 double duration);

  double position(double t) const;
  double velocity(double t) const;
  double acceleration(double t) const;
  double jerk(double t) const;
  const std::array<double, 6>& coefficients() const { return c_; }

 private:
  std::array<double, 6> c_{};
};

struct Prototype {
  int pattern_id = 1;
  Trajectory trajectory;
  bool infeasible = false;            // nominal profile violated limits; closest limit trajectory used
  bool collision_constrained = false; // capped by the front-vehicle safety envelope
};

struct PrototypeSet {
  std::vector<Prototype> prototypes;  // index j-1 holds pattern j
  int generated_for = 0;
  double horizon = 3.0;
  bool degenerate = false;  // terminal offsets were applied to separate collapsed prototypes

  std::size_t size() const { return prototypes.size(); }
  const Trajectory& trajectory(int pattern_id) const;
};

/// Kinematic state of the predicted vehicle at the planning instant.
struct InitialState {
  double t0 = 0.0;
  double x = 0.0;
  double v = 0.0;
  double a = 0.0;
  double y = 0.0;
  double length = 4.8;
  double width = 1.9;
};

/// Front vehicle at the planning instant; extrapolated at constant velocity.
struct FrontVehicle {
  double x = 0.0;
  double v = 0.0;
  double length = 4.8;

  double rear_at(double tau) const { return x + v * tau - 0.5 * length; }
};

inline constexpr double kMinFrontGap = 1.0;
inline constexpr double kMinPairwiseSeparation = 0.5;

PrototypeSet generate_prototypes(const InitialState& state, const std::optional<FrontVehicle>& front,
                                 std::span<const MotionPattern> patterns, const PlannerLimits& limits,
                                 double horizon, double dt, int sample_id = 0);

/// Plans from the last history point of the target; the front vehicle (if any)
/// is taken from the last history point of entity 2.
PrototypeSet generate_prototypes(const SceneSample& sample, std::span<const MotionPattern> patterns,
                                 const PlannerLimits& limits);

/// Largest over-time position difference between any two prototypes' minimum.
double min_pairwise_separation(const PrototypeSet& set);

/// Smallest gap between the front-vehicle extrapolation rear and the
/// trajectory front over all samples.
double min_front_gap(const Trajectory& traj, const FrontVehicle& front, double t0);

/// True when a, v stay inside the limits at every sample.
bool respects_limits(const Trajectory& traj, const PlannerLimits& limits, double tol = 1e-9);

double rms_distance(const Trajectory& a, const Trajectory& b);

/// argmin_j RMS position distance to future_predicted; ties go to the lower id.
int label_ground_truth(const SceneSample& sample, const PrototypeSet& protos);
int label_ground_truth(const Trajectory& future, const PrototypeSet& protos);

}  // namespace rxbench::protogen
