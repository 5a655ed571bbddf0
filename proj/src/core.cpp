#include "rxbench/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace rxbench {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ZeroMarginal: return "ZeroMarginal";
    case ErrorKind::PatternOutOfRange: return "PatternOutOfRange";
    case ErrorKind::InfeasiblePattern: return "InfeasiblePattern";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EmptyData: return "EmptyData";
    case ErrorKind::NumericalUnderflow: return "NumericalUnderflow";
    case ErrorKind::Divergence: return "Divergence";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::EpisodeTooShort: return "EpisodeTooShort";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnitError: return "UnitError";
    case ErrorKind::TooFewEpisodes: return "TooFewEpisodes";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

TrajectoryPoint Trajectory::interpolate(double t) const {
  if (points.empty()) throw Error(ErrorKind::InvalidArgument, "interpolate on empty trajectory");
  if (t <= points.front().t) return points.front();
  if (t >= points.back().t) return points.back();
  const double u = (t - points.front().t) / dt;
  auto i = static_cast<std::size_t>(std::floor(u));
  i = std::min(i, points.size() - 2);
  const double f = (t - points[i].t) / (points[i + 1].t - points[i].t);
  const auto& p = points[i];
  const auto& q = points[i + 1];
  return {t, p.x + f * (q.x - p.x), p.v + f * (q.v - p.v), p.a + f * (q.a - p.a),
          p.y + f * (q.y - p.y)};
}

void validate_trajectory(const Trajectory& traj, double a_bound) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidArgument, msg); };
  if (traj.points.size() < 2) fail("trajectory needs at least 2 points");
  if (!(traj.dt > 0.0)) fail("trajectory dt must be positive");
  const double slack = 0.5 * a_bound * traj.dt * traj.dt + 1e-9;
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    const auto& p = traj.points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.v) || !std::isfinite(p.a) || !std::isfinite(p.y)) {
      fail("non-finite state at index " + std::to_string(i));
    }
    if (p.v < -1e-12) fail("negative speed at index " + std::to_string(i));
    if (i + 1 == traj.points.size()) break;
    const auto& q = traj.points[i + 1];
    if (std::abs((q.t - p.t) - traj.dt) > 1e-9) fail("irregular time step at index " + std::to_string(i));
    if (std::abs(q.x - p.x - p.v * traj.dt) > slack) {
      fail("finite-difference inconsistency at index " + std::to_string(i));
    }
  }
}

const char* to_string(PatternLabel label) {
  switch (label) {
    case PatternLabel::HardYield: return "HardYield";
    case PatternLabel::Yield: return "Yield";
    case PatternLabel::KeepGap: return "KeepGap";
    case PatternLabel::CloseGap: return "CloseGap";
  }
  return "Unknown";
}

std::vector<MotionPattern> default_patterns() {
  return {
      {1, PatternLabel::HardYield, 0.3, 0.0},
      {2, PatternLabel::Yield, 0.7, 1.0},
      {3, PatternLabel::KeepGap, 1.0, 2.0},
      {4, PatternLabel::CloseGap, 1.2, 3.0},
  };
}

void validate_patterns(std::span<const MotionPattern> patterns) {
  if (patterns.size() < 2) throw Error(ErrorKind::InvalidArgument, "need at least 2 motion patterns");
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    if (patterns[i].id != static_cast<int>(i) + 1) {
      throw Error(ErrorKind::InvalidArgument, "pattern ids must be 1..M in order");
    }
    if (i > 0 && static_cast<int>(patterns[i].label) < static_cast<int>(patterns[i - 1].label)) {
      throw Error(ErrorKind::InvalidArgument, "patterns must be ordered by aggressiveness");
    }
    if (!(patterns[i].terminal_speed_factor >= 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "terminal speed factor must be non-negative");
    }
  }
}

const Trajectory& SceneSample::host_history() const { return history.at(kHostEntity); }
const Trajectory& SceneSample::target_history() const { return history.at(kTargetEntity); }
const Trajectory* SceneSample::front_history() const {
  auto it = history.find(kFrontEntity);
  return it == history.end() ? nullptr : &it->second;
}

void validate_distribution(const PredictionDistribution& dist) {
  if (dist.probs.empty()) throw Error(ErrorKind::InvalidArgument, "empty distribution");
  double sum = 0.0;
  for (std::size_t j = 0; j < dist.probs.size(); ++j) {
    const double p = dist.probs[j];
    if (!(p >= 0.0 && p <= 1.0)) {
      std::ostringstream os;
      os << "probability " << p << " at pattern " << j + 1 << " outside [0,1]";
      throw Error(ErrorKind::InvalidArgument, os.str());
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbabilityTolerance) {
    std::ostringstream os;
    os << "probabilities sum to " << sum;
    throw Error(ErrorKind::InvalidArgument, os.str());
  }
}

double log_sum_exp(std::span<const double> values) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

PredictionDistribution softmax(std::span<const double> log_weights) {
  const double lse = log_sum_exp(log_weights);
  if (!std::isfinite(lse)) throw Error(ErrorKind::NumericalUnderflow, "softmax of all -inf weights");
  // Shift by the maximum rather than the log-sum so large weights keep full precision.
  const double top = *std::max_element(log_weights.begin(), log_weights.end());
  PredictionDistribution out;
  out.probs.reserve(log_weights.size());
  double sum = 0.0;
  for (double w : log_weights) {
    out.probs.push_back(std::exp(w - top));
    sum += out.probs.back();
  }
  for (double& p : out.probs) p /= sum;
  return out;
}

namespace {

PredictionDistribution condition_row(const JointTable& joint, std::size_t host_pattern) {
  if (joint.values.size() != joint.rows * joint.cols || joint.cols == 0) {
    throw Error(ErrorKind::DimensionMismatch, "joint table shape does not match its values");
  }
  if (host_pattern >= joint.rows) throw Error(ErrorKind::PatternOutOfRange, "host pattern row out of range");
  double row_sum = 0.0;
  for (std::size_t c = 0; c < joint.cols; ++c) row_sum += joint.at(host_pattern, c);
  if (row_sum < 1e-12) throw Error(ErrorKind::ZeroMarginal, "host pattern has no joint mass");
  PredictionDistribution out;
  out.probs.resize(joint.cols);
  for (std::size_t c = 0; c < joint.cols; ++c) out.probs[c] = joint.at(host_pattern, c) / row_sum;
  return out;
}

}  // namespace

PredictionDistribution situation_to_reaction_unnormalized(const JointTable& joint,
                                                          std::size_t host_pattern) {
  for (double v : joint.values) {
    if (!(v >= 0.0)) throw Error(ErrorKind::InvalidArgument, "joint entries must be non-negative");
  }
  return condition_row(joint, host_pattern);
}

PredictionDistribution situation_to_reaction(const JointTable& joint, std::size_t host_pattern) {
  double total = 0.0;
  for (double v : joint.values) {
    if (!(v >= 0.0)) throw Error(ErrorKind::InvalidArgument, "joint entries must be non-negative");
    total += v;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    throw Error(ErrorKind::InvalidArgument, "joint table must sum to 1");
  }
  return condition_row(joint, host_pattern);
}

std::vector<double> outcome_vector(int gt_pattern, std::size_t m) {
  if (gt_pattern < 1 || static_cast<std::size_t>(gt_pattern) > m) {
    throw Error(ErrorKind::PatternOutOfRange,
                "ground-truth pattern " + std::to_string(gt_pattern) + " not in 1.." + std::to_string(m));
  }
  std::vector<double> out(m, 0.0);
  out[static_cast<std::size_t>(gt_pattern - 1)] = 1.0;
  return out;
}

std::vector<double> outcome_vector(const SceneSample& sample, std::size_t m) {
  return outcome_vector(sample.gt_pattern, m);
}

}  // namespace rxbench
