#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "rxbench/core.hpp"
#include "rxbench/protogen.hpp"

namespace rxbench::mdn {

inline constexpr double kSigmaFloor = 1e-4;
inline constexpr std::size_t kStateDim = 6;

/// Feed-forward tanh network whose last layer emits, per mixture component,
/// a weight logit, a mean and a log-sigma (in that block order).
struct MdnModel {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., 3 * n_components
  std::size_t n_components = 3;
  std::vector<double> params;            // per layer: W (out x in, row-major) then b
  std::vector<double> input_mean;
  std::vector<double> input_std;
  // Scene context baked into the state features.
  double ramp_end_x = 0.0;
  double dt = 0.1;

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t n_params() const { return params.size(); }
};

struct MixtureParams {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> sigmas;

  double log_density(double action) const;
};

struct MdnExample {
  std::vector<double> state;
  double action = 0.0;  // target acceleration over the next step, m/s^2
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Deterministic Glorot-style initialization. The output layer can be zeroed.
MdnModel make_mdn(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t n_components,
                  std::uint64_t seed, bool zero_output_layer = false);

MixtureParams mdn_forward(const MdnModel& model, std::span<const double> state);

/// Summed negative log-likelihood and its gradient by reverse-mode
/// differentiation. Fixed-size blocks are processed in parallel and reduced
/// in block order, so results do not depend on the thread count.
LossAndGrad mdn_nll(const MdnModel& model, std::span<const MdnExample> data);
double mdn_loss(const MdnModel& model, std::span<const MdnExample> data);

namespace serial {
LossAndGrad mdn_nll(const MdnModel& model, std::span<const MdnExample> data);
}  // namespace serial

struct MdnTrainOptions {
  double lr = 0.01;
  int epochs = 20;
  std::size_t batch = 64;
  std::uint64_t seed = 1;
  std::vector<std::size_t> hidden = {16, 16};
  std::size_t n_components = 3;
};

struct MdnTrainResult {
  MdnModel model;
  std::vector<double> loss_history;  // full-data mean NLL, index 0 = initial model
  int best_epoch = 0;
};

/// Minibatch SGD on the mean NLL. Returns the parameters of the epoch with the
/// lowest full-data loss (the initial model included). Throws Divergence on a
/// non-finite loss.
MdnTrainResult train_mdn(std::span<const MdnExample> data, MdnModel init, const MdnTrainOptions& options);

/// Sets input_mean/input_std from the data.
void fit_normalization(MdnModel& model, std::span<const MdnExample> data);

/// [host rear - target front, v_target, v_host, a_target (last realized step),
///  y_host - y_target, ramp_end_x - x_host].
std::vector<double> state_features(const TrajectoryPoint& host, const Trajectory& host_traj, const TrajectoryPoint& target,
                                   const Trajectory& target_traj, double target_prev_accel, double ramp_end_x);

/// (state, action) pairs for every step of a host/target trajectory pair.
std::vector<MdnExample> rollout_examples(const Trajectory& host, const Trajectory& target, double ramp_end_x,
                                         double initial_prev_accel);

/// Horizon log-likelihood of each prototype paired with the host future,
/// normalized across prototypes.
PredictionDistribution predict_mdn(const MdnModel& model, const SceneSample& sample,
                                   const protogen::PrototypeSet& protos);

nlohmann::json to_json(const MdnModel& model, const MdnTrainOptions& options,
                       const std::vector<double>& loss_history);
MdnModel mdn_model_from_json(const nlohmann::json& j);

}  // namespace rxbench::mdn
