#include "rxbench/mdn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "rxbench/random.hpp"

namespace rxbench::mdn {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr std::size_t kBlockSize = 256;

std::size_t n_layers(const MdnModel& m) { return m.layer_sizes.size() - 1; }

// Offset of layer l's weight matrix inside params; its bias follows it.
std::size_t layer_offset(const MdnModel& m, std::size_t l) {
  std::size_t off = 0;
  for (std::size_t i = 0; i < l; ++i) off += m.layer_sizes[i + 1] * (m.layer_sizes[i] + 1);
  return off;
}

std::vector<double> normalize_input(const MdnModel& m, std::span<const double> state) {
  if (state.size() != m.input_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "MDN state has dimension " + std::to_string(state.size()) +
                                                  ", expected " + std::to_string(m.input_dim()));
  }
  std::vector<double> x(state.begin(), state.end());
  if (m.input_mean.size() == x.size()) {
    for (std::size_t d = 0; d < x.size(); ++d) x[d] = (x[d] - m.input_mean[d]) / m.input_std[d];
  }
  return x;
}

// acts[0] = normalized input, acts[l+1] = layer l output (tanh except last).
void forward_pass(const MdnModel& m, std::span<const double> state, std::vector<std::vector<double>>& acts) {
  const std::size_t L = n_layers(m);
  acts.resize(L + 1);
  acts[0] = normalize_input(m, state);
  std::size_t off = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t in = m.layer_sizes[l];
    const std::size_t out = m.layer_sizes[l + 1];
    const double* W = m.params.data() + off;
    const double* b = W + out * in;
    auto& z = acts[l + 1];
    z.assign(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < in; ++i) s += W[o * in + i] * acts[l][i];
      z[o] = l + 1 < L ? std::tanh(s) : s;
    }
    off += out * (in + 1);
  }
}

struct HeadTerms {
  double loss = 0.0;
  std::vector<double> d_out;  // dL/d(raw network output)
};

HeadTerms head_loss(const MdnModel& m, std::span<const double> out, double action, bool want_grad) {
  const std::size_t n = m.n_components;
  const double log_floor = std::log(kSigmaFloor);
  std::vector<double> logits(out.begin(), out.begin() + static_cast<long>(n));
  const double lse_w = log_sum_exp(logits);
  std::vector<double> joint(n);
  std::vector<double> z(n);
  std::vector<double> sigma(n);
  for (std::size_t c = 0; c < n; ++c) {
    const double ls = std::max(out[2 * n + c], log_floor);
    sigma[c] = std::exp(ls);
    z[c] = (action - out[n + c]) / sigma[c];
    joint[c] = (logits[c] - lse_w) - kHalfLog2Pi - ls - 0.5 * z[c] * z[c];
  }
  const double lse = log_sum_exp(joint);
  HeadTerms h;
  h.loss = -lse;
  if (!want_grad) return h;
  h.d_out.assign(3 * n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    const double r = std::exp(joint[c] - lse);
    const double w = std::exp(logits[c] - lse_w);
    h.d_out[c] = w - r;
    h.d_out[n + c] = -r * z[c] / sigma[c];
    h.d_out[2 * n + c] = out[2 * n + c] > log_floor ? r * (1.0 - z[c] * z[c]) : 0.0;
  }
  return h;
}

// Adds the example's loss and gradient into (loss, grad).
void accumulate(const MdnModel& m, const MdnExample& ex, double& loss, std::vector<double>& grad,
                std::vector<std::vector<double>>& acts) {
  forward_pass(m, ex.state, acts);
  const std::size_t L = n_layers(m);
  auto head = head_loss(m, acts[L], ex.action, true);
  loss += head.loss;
  std::vector<double> delta = std::move(head.d_out);
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t in = m.layer_sizes[l];
    const std::size_t out = m.layer_sizes[l + 1];
    const std::size_t off = layer_offset(m, l);
    double* gW = grad.data() + off;
    double* gb = gW + out * in;
    for (std::size_t o = 0; o < out; ++o) {
      gb[o] += delta[o];
      for (std::size_t i = 0; i < in; ++i) gW[o * in + i] += delta[o] * acts[l][i];
    }
    if (l == 0) break;
    const double* W = m.params.data() + off;
    std::vector<double> prev(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t i = 0; i < in; ++i) prev[i] += W[o * in + i] * delta[o];
    }
    for (std::size_t i = 0; i < in; ++i) prev[i] *= 1.0 - acts[l][i] * acts[l][i];
    delta = std::move(prev);
  }
}

LossAndGrad nll_indices(const MdnModel& m, std::span<const MdnExample> data, std::span<const std::size_t> idx) {
  LossAndGrad out{0.0, std::vector<double>(m.n_params(), 0.0)};
  std::vector<std::vector<double>> acts;
  for (std::size_t i : idx) accumulate(m, data[i], out.loss, out.grad, acts);
  return out;
}

}  // namespace

double MixtureParams::log_density(double action) const {
  std::vector<double> terms(weights.size());
  for (std::size_t c = 0; c < weights.size(); ++c) {
    const double z = (action - means[c]) / sigmas[c];
    terms[c] = std::log(weights[c]) - kHalfLog2Pi - std::log(sigmas[c]) - 0.5 * z * z;
  }
  return log_sum_exp(terms);
}

MdnModel make_mdn(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t n_components,
                  std::uint64_t seed, bool zero_output_layer) {
  if (input_dim == 0 || n_components == 0) throw Error(ErrorKind::InvalidArgument, "MDN needs d >= 1 and N_m >= 1");
  MdnModel m;
  m.n_components = n_components;
  m.layer_sizes.push_back(input_dim);
  m.layer_sizes.insert(m.layer_sizes.end(), hidden.begin(), hidden.end());
  m.layer_sizes.push_back(3 * n_components);
  std::mt19937_64 rng(seed);
  const std::size_t L = n_layers(m);
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t in = m.layer_sizes[l];
    const std::size_t out = m.layer_sizes[l + 1];
    const bool last = l + 1 == L;
    const double scale = last ? 0.1 * std::sqrt(1.0 / static_cast<double>(in))
                              : std::sqrt(2.0 / static_cast<double>(in + out));
    for (std::size_t k = 0; k < out * in; ++k) {
      m.params.push_back(last && zero_output_layer ? 0.0 : scale * standard_normal(rng));
    }
    m.params.insert(m.params.end(), out, 0.0);
  }
  m.input_mean.assign(input_dim, 0.0);
  m.input_std.assign(input_dim, 1.0);
  return m;
}

MixtureParams mdn_forward(const MdnModel& model, std::span<const double> state) {
  std::vector<std::vector<double>> acts;
  forward_pass(model, state, acts);
  const auto& o = acts.back();
  const std::size_t n = model.n_components;
  MixtureParams p;
  std::vector<double> logits(o.begin(), o.begin() + static_cast<long>(n));
  p.weights = softmax(logits).probs;
  for (std::size_t c = 0; c < n; ++c) {
    p.means.push_back(o[n + c]);
    p.sigmas.push_back(std::exp(std::max(o[2 * n + c], std::log(kSigmaFloor))));
  }
  return p;
}

LossAndGrad mdn_nll(const MdnModel& model, std::span<const MdnExample> data) {
  if (data.empty()) throw Error(ErrorKind::EmptyData, "MDN loss needs a non-empty dataset");
  const std::size_t n_blocks = (data.size() + kBlockSize - 1) / kBlockSize;
  std::vector<LossAndGrad> partial(n_blocks);
#pragma omp parallel for schedule(dynamic)
  for (long b = 0; b < static_cast<long>(n_blocks); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kBlockSize;
    const std::size_t hi = std::min(data.size(), lo + kBlockSize);
    std::vector<std::size_t> idx(hi - lo);
    std::iota(idx.begin(), idx.end(), lo);
    partial[static_cast<std::size_t>(b)] = nll_indices(model, data, idx);
  }
  LossAndGrad total{0.0, std::vector<double>(model.n_params(), 0.0)};
  for (const auto& p : partial) {
    total.loss += p.loss;
    for (std::size_t k = 0; k < total.grad.size(); ++k) total.grad[k] += p.grad[k];
  }
  return total;
}

double mdn_loss(const MdnModel& model, std::span<const MdnExample> data) {
  if (data.empty()) throw Error(ErrorKind::EmptyData, "MDN loss needs a non-empty dataset");
  const auto n = static_cast<long>(data.size());
  std::vector<double> losses(data.size());
#pragma omp parallel
  {
    std::vector<std::vector<double>> acts;
#pragma omp for schedule(static)
    for (long i = 0; i < n; ++i) {
      const auto& ex = data[static_cast<std::size_t>(i)];
      forward_pass(model, ex.state, acts);
      losses[static_cast<std::size_t>(i)] = head_loss(model, acts.back(), ex.action, false).loss;
    }
  }
  return std::accumulate(losses.begin(), losses.end(), 0.0);
}

namespace serial {

LossAndGrad mdn_nll(const MdnModel& model, std::span<const MdnExample> data) {
  if (data.empty()) throw Error(ErrorKind::EmptyData, "MDN loss needs a non-empty dataset");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  return nll_indices(model, data, idx);
}

}  // namespace serial

void fit_normalization(MdnModel& model, std::span<const MdnExample> data) {
  if (data.empty()) throw Error(ErrorKind::EmptyData, "normalization needs data");
  const std::size_t d = model.input_dim();
  const double n = static_cast<double>(data.size());
  model.input_mean.assign(d, 0.0);
  model.input_std.assign(d, 0.0);
  for (const auto& ex : data) {
    for (std::size_t i = 0; i < d; ++i) model.input_mean[i] += ex.state[i] / n;
  }
  for (const auto& ex : data) {
    for (std::size_t i = 0; i < d; ++i) {
      const double e = ex.state[i] - model.input_mean[i];
      model.input_std[i] += e * e / n;
    }
  }
  for (double& s : model.input_std) s = s > 1e-18 ? std::sqrt(s) : 1.0;
}

MdnTrainResult train_mdn(std::span<const MdnExample> data, MdnModel init, const MdnTrainOptions& options) {
  if (data.empty()) throw Error(ErrorKind::EmptyData, "MDN training needs data");
  if (options.batch == 0 || data.size() < options.batch) {
    throw Error(ErrorKind::InvalidArgument, "MDN training needs dataset size >= batch >= 1");
  }
  MdnTrainResult res;
  res.model = std::move(init);
  const double n = static_cast<double>(data.size());
  double best = mdn_loss(res.model, data) / n;
  if (!std::isfinite(best)) throw Error(ErrorKind::Divergence, "initial MDN loss is not finite");
  res.loss_history.push_back(best);
  MdnModel best_model = res.model;

  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    shuffle_in_place(order, rng);
    for (std::size_t lo = 0; lo < order.size(); lo += options.batch) {
      const std::size_t hi = std::min(order.size(), lo + options.batch);
      const auto g = nll_indices(res.model, data, std::span<const std::size_t>(order).subspan(lo, hi - lo));
      const double step = options.lr / static_cast<double>(hi - lo);
      for (std::size_t k = 0; k < g.grad.size(); ++k) res.model.params[k] -= step * g.grad[k];
    }
    const double loss = mdn_loss(res.model, data) / n;
    res.loss_history.push_back(loss);
    if (!std::isfinite(loss)) {
      throw Error(ErrorKind::Divergence, "MDN loss became non-finite at epoch " + std::to_string(epoch));
    }
    if (loss < best) {
      best = loss;
      best_model = res.model;
      res.best_epoch = epoch;
    }
  }
  res.model = std::move(best_model);
  return res;
}

std::vector<double> state_features(const TrajectoryPoint& host, const Trajectory& host_traj, const TrajectoryPoint& target,
                                   const Trajectory& target_traj, double target_prev_accel, double ramp_end_x) {
  const double gap = (host.x - 0.5 * host_traj.vehicle_length) - (target.x + 0.5 * target_traj.vehicle_length);
  return {gap, target.v, host.v, target_prev_accel, host.y - target.y, ramp_end_x - host.x};
}

std::vector<MdnExample> rollout_examples(const Trajectory& host, const Trajectory& target, double ramp_end_x,
                                         double initial_prev_accel) {
  const std::size_t n = std::min(host.size(), target.size());
  std::vector<MdnExample> out;
  if (n < 2) return out;
  out.reserve(n - 1);
  const double dt = target.dt;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double prev = k == 0 ? initial_prev_accel : (target.points[k].v - target.points[k - 1].v) / dt;
    out.push_back({state_features(host.points[k], host, target.points[k], target, prev, ramp_end_x),
                   (target.points[k + 1].v - target.points[k].v) / dt});
  }
  return out;
}

PredictionDistribution predict_mdn(const MdnModel& model, const SceneSample& sample,
                                   const protogen::PrototypeSet& protos) {
  const Trajectory& hist = sample.target_history();
  const std::size_t h = hist.size();
  const double prev = h >= 2 ? (hist.points[h - 1].v - hist.points[h - 2].v) / hist.dt : hist.back().a;
  std::vector<double> logliks;
  logliks.reserve(protos.size());
  for (const auto& proto : protos.prototypes) {
    double ll = 0.0;
    for (const auto& ex : rollout_examples(sample.future_host, proto.trajectory, model.ramp_end_x, prev)) {
      ll += mdn_forward(model, ex.state).log_density(ex.action);
    }
    logliks.push_back(ll);
  }
  return softmax(logliks);
}

nlohmann::json to_json(const MdnModel& model, const MdnTrainOptions& options,
                       const std::vector<double>& loss_history) {
  return {{"kind", "mdn"},
          {"version", 1},
          {"state_features",
           {"gap_to_merge_point", "target_speed", "host_speed", "target_accel", "host_lateral_offset",
            "distance_to_ramp_end"}},
          {"layer_sizes", model.layer_sizes},
          {"n_components", model.n_components},
          {"params", model.params},
          {"input_mean", model.input_mean},
          {"input_std", model.input_std},
          {"ramp_end_x", model.ramp_end_x},
          {"dt", model.dt},
          {"train",
           {{"lr", options.lr}, {"epochs", options.epochs}, {"batch", options.batch}, {"seed", options.seed}}},
          {"loss_history", loss_history}};
}

MdnModel mdn_model_from_json(const nlohmann::json& j) {
  if (j.at("kind") != "mdn" || j.at("version") != 1) {
    throw Error(ErrorKind::ParseError, "not a version-1 mdn model document");
  }
  MdnModel m;
  m.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
  m.n_components = j.at("n_components");
  m.params = j.at("params").get<std::vector<double>>();
  m.input_mean = j.at("input_mean").get<std::vector<double>>();
  m.input_std = j.at("input_std").get<std::vector<double>>();
  m.ramp_end_x = j.at("ramp_end_x");
  m.dt = j.at("dt");
  if (m.layer_sizes.size() < 2 || m.layer_sizes.back() != 3 * m.n_components ||
      m.params.size() != layer_offset(m, m.layer_sizes.size() - 1)) {
    throw Error(ErrorKind::ParseError, "mdn model shape is inconsistent");
  }
  return m;
}

}  // namespace rxbench::mdn
