#include "rxbench/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rxbench/random.hpp"

namespace rxbench::hmm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void check_dim(std::span<const double> x, std::size_t dim) {
  if (x.size() != dim) {
    throw Error(ErrorKind::DimensionMismatch,
                "observation has dimension " + std::to_string(x.size()) + ", model expects " + std::to_string(dim));
  }
}

}  // namespace

double DiagGaussian::log_density(std::span<const double> x) const {
  check_dim(x, mean.size());
  double acc = 0.0;
  for (std::size_t d = 0; d < mean.size(); ++d) {
    const double e = x[d] - mean[d];
    acc += kLog2Pi + std::log(var[d]) + e * e / var[d];
  }
  return -0.5 * acc;
}

double GaussianMixture::log_density(std::span<const double> x) const {
  std::vector<double> terms(components.size());
  for (std::size_t c = 0; c < components.size(); ++c) {
    terms[c] = std::log(weights[c]) + components[c].log_density(x);
  }
  return log_sum_exp(terms);
}

double GaussianMixture::density(std::span<const double> x) const { return std::exp(log_density(x)); }

void GaussianHmm::validate() const {
  const std::size_t h = n_states;
  if (h == 0 || initial.size() != h || transition.size() != h * h || emissions.size() != h) {
    throw Error(ErrorKind::DimensionMismatch, "HMM parameter shapes disagree with n_states");
  }
  auto simplex = [](auto first, auto last) {
    double s = 0.0;
    for (auto it = first; it != last; ++it) {
      if (!(*it >= 0.0)) return false;
      s += *it;
    }
    return std::abs(s - 1.0) <= kProbabilityTolerance;
  };
  if (!simplex(initial.begin(), initial.end())) throw Error(ErrorKind::InvalidArgument, "initial is not a simplex");
  for (std::size_t i = 0; i < h; ++i) {
    auto row = transition.begin() + static_cast<long>(i * h);
    if (!simplex(row, row + static_cast<long>(h))) {
      throw Error(ErrorKind::InvalidArgument, "transition row " + std::to_string(i) + " is not a simplex");
    }
  }
  for (const auto& e : emissions) {
    if (e.mean.size() != dim() || e.var.size() != dim()) throw Error(ErrorKind::DimensionMismatch, "emission shape");
  }
}

namespace {

// Emission log densities, T x H.
std::vector<double> emission_logs(const GaussianHmm& model, const Sequence& obs) {
  const std::size_t h = model.n_states;
  std::vector<double> out(obs.size() * h);
  for (std::size_t t = 0; t < obs.size(); ++t) {
    for (std::size_t i = 0; i < h; ++i) out[t * h + i] = model.emissions[i].log_density(obs[t]);
  }
  return out;
}

struct ForwardBackward {
  double loglik = 0.0;
  std::vector<double> gamma;  // T x H
  std::vector<double> xi_sum; // H x H, summed over t
};

// Rabiner-scaled recursions; emissions are shifted by their per-frame maximum.
ForwardBackward forward_backward(const GaussianHmm& model, const Sequence& obs, bool want_posteriors) {
  const std::size_t h = model.n_states;
  const std::size_t T = obs.size();
  const auto logb = emission_logs(model, obs);
  std::vector<double> b(T * h);
  std::vector<double> alpha(T * h);
  std::vector<double> scale(T);
  ForwardBackward fb;
  for (std::size_t t = 0; t < T; ++t) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < h; ++i) m = std::max(m, logb[t * h + i]);
    for (std::size_t i = 0; i < h; ++i) b[t * h + i] = std::exp(logb[t * h + i] - m);
    double c = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
      double pred = 0.0;
      if (t == 0) {
        pred = model.initial[j];
      } else {
        for (std::size_t i = 0; i < h; ++i) pred += alpha[(t - 1) * h + i] * model.a(i, j);
      }
      alpha[t * h + j] = pred * b[t * h + j];
      c += alpha[t * h + j];
    }
    if (!(c > 0.0)) {
      fb.loglik = -std::numeric_limits<double>::infinity();
      return fb;
    }
    for (std::size_t j = 0; j < h; ++j) alpha[t * h + j] /= c;
    scale[t] = c;
    fb.loglik += std::log(c) + m;
  }
  if (!want_posteriors) return fb;

  std::vector<double> beta(T * h, 1.0);
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t i = 0; i < h; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < h; ++j) s += model.a(i, j) * b[(t + 1) * h + j] * beta[(t + 1) * h + j];
      beta[t * h + i] = s / scale[t + 1];
    }
  }
  fb.gamma.resize(T * h);
  for (std::size_t t = 0; t < T; ++t) {
    double s = 0.0;
    for (std::size_t i = 0; i < h; ++i) s += fb.gamma[t * h + i] = alpha[t * h + i] * beta[t * h + i];
    for (std::size_t i = 0; i < h; ++i) fb.gamma[t * h + i] /= s;
  }
  fb.xi_sum.assign(h * h, 0.0);
  for (std::size_t t = 0; t + 1 < T; ++t) {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < h; ++j) {
        fb.xi_sum[i * h + j] +=
            alpha[t * h + i] * model.a(i, j) * b[(t + 1) * h + j] * beta[(t + 1) * h + j] / scale[t + 1];
      }
    }
  }
  return fb;
}

std::vector<Observation> pool(const std::vector<Sequence>& sequences) {
  std::vector<Observation> all;
  for (const auto& s : sequences) all.insert(all.end(), s.begin(), s.end());
  return all;
}

// Equal-count bins along the first feature.
std::vector<DiagGaussian> quantile_init(const std::vector<Observation>& points, std::size_t k, double var_floor,
                                        std::uint64_t seed) {
  const std::size_t dim = points.front().size();
  const double n = static_cast<double>(points.size());
  std::vector<double> gmean(dim, 0.0);
  std::vector<double> gvar(dim, 0.0);
  for (const auto& p : points) {
    for (std::size_t d = 0; d < dim; ++d) gmean[d] += p[d] / n;
  }
  for (const auto& p : points) {
    for (std::size_t d = 0; d < dim; ++d) gvar[d] += (p[d] - gmean[d]) * (p[d] - gmean[d]) / n;
  }
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return points[a][0] < points[b][0]; });

  std::mt19937_64 rng(seed);
  std::vector<DiagGaussian> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t lo = c * points.size() / k;
    const std::size_t hi = (c + 1) * points.size() / k;
    auto& g = out[c];
    g.mean.assign(dim, 0.0);
    g.var.assign(dim, 0.0);
    const double cnt = static_cast<double>(hi - lo);
    if (hi - lo < 2) {
      g.mean = gmean;
      g.var = gvar;
    } else {
      for (std::size_t i = lo; i < hi; ++i) {
        for (std::size_t d = 0; d < dim; ++d) g.mean[d] += points[idx[i]][d] / cnt;
      }
      for (std::size_t i = lo; i < hi; ++i) {
        for (std::size_t d = 0; d < dim; ++d) {
          const double e = points[idx[i]][d] - g.mean[d];
          g.var[d] += e * e / cnt;
        }
      }
    }
    for (std::size_t d = 0; d < dim; ++d) {
      g.mean[d] += 1e-3 * std::sqrt(gvar[d]) * standard_normal(rng);
      g.var[d] = std::max(g.var[d], var_floor);
    }
  }
  return out;
}

}  // namespace

double forward_loglik(const GaussianHmm& model, const Sequence& obs) {
  if (obs.empty()) throw Error(ErrorKind::InvalidArgument, "observation sequence is empty");
  for (const auto& o : obs) check_dim(o, model.dim());
  return forward_backward(model, obs, false).loglik;
}

BaumWelchResult baum_welch(const std::vector<Sequence>& sequences, const BaumWelchOptions& options) {
  if (sequences.empty()) throw Error(ErrorKind::EmptyData, "Baum-Welch needs at least one sequence");
  if (options.n_states < 1) throw Error(ErrorKind::InvalidArgument, "Baum-Welch needs H >= 1");
  for (const auto& s : sequences) {
    if (s.empty()) throw Error(ErrorKind::EmptyData, "empty training sequence");
  }
  const std::size_t h = options.n_states;
  const std::size_t dim = sequences.front().front().size();
  for (const auto& s : sequences) {
    for (const auto& o : s) check_dim(o, dim);
  }

  BaumWelchResult res;
  GaussianHmm& m = res.model;
  m.n_states = h;
  m.initial.assign(h, 1.0 / static_cast<double>(h));
  m.transition.assign(h * h, h == 1 ? 1.0 : 0.2 / static_cast<double>(h - 1));
  for (std::size_t i = 0; i < h; ++i) m.transition[i * h + i] = h == 1 ? 1.0 : 0.8;
  m.emissions = quantile_init(pool(sequences), h, options.var_floor, options.seed);

  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iter; ++it) {
    std::vector<ForwardBackward> fbs;
    fbs.reserve(sequences.size());
    double ll = 0.0;
    for (const auto& s : sequences) {
      fbs.push_back(forward_backward(m, s, true));
      ll += fbs.back().loglik;
    }
    res.loglik_history.push_back(ll);
    if (!std::isfinite(ll)) throw Error(ErrorKind::NumericalUnderflow, "HMM likelihood underflowed");
    if (it > 0 && ll - prev < options.tol) {
      res.converged = true;
      return res;
    }
    prev = ll;

    // M-step.
    std::vector<double> init(h, 0.0);
    std::vector<double> trans_num(h * h, 0.0);
    std::vector<double> trans_den(h, 0.0);
    std::vector<double> occ(h, 0.0);
    std::vector<std::vector<double>> mean_acc(h, std::vector<double>(dim, 0.0));
    for (std::size_t sidx = 0; sidx < sequences.size(); ++sidx) {
      const auto& s = sequences[sidx];
      const auto& fb = fbs[sidx];
      for (std::size_t i = 0; i < h; ++i) init[i] += fb.gamma[i];
      for (std::size_t k = 0; k < h * h; ++k) trans_num[k] += fb.xi_sum[k];
      for (std::size_t t = 0; t < s.size(); ++t) {
        for (std::size_t i = 0; i < h; ++i) {
          const double g = fb.gamma[t * h + i];
          occ[i] += g;
          if (t + 1 < s.size()) trans_den[i] += g;
          for (std::size_t d = 0; d < dim; ++d) mean_acc[i][d] += g * s[t][d];
        }
      }
    }
    for (std::size_t i = 0; i < h; ++i) m.initial[i] = init[i] / static_cast<double>(sequences.size());
    for (std::size_t i = 0; i < h; ++i) {
      if (trans_den[i] <= 0.0) continue;
      double row = 0.0;
      for (std::size_t j = 0; j < h; ++j) row += trans_num[i * h + j];
      for (std::size_t j = 0; j < h; ++j) m.transition[i * h + j] = trans_num[i * h + j] / row;
    }
    for (std::size_t i = 0; i < h; ++i) {
      if (occ[i] <= 0.0) continue;
      for (std::size_t d = 0; d < dim; ++d) m.emissions[i].mean[d] = mean_acc[i][d] / occ[i];
    }
    std::vector<std::vector<double>> var_acc(h, std::vector<double>(dim, 0.0));
    for (std::size_t sidx = 0; sidx < sequences.size(); ++sidx) {
      const auto& s = sequences[sidx];
      const auto& fb = fbs[sidx];
      for (std::size_t t = 0; t < s.size(); ++t) {
        for (std::size_t i = 0; i < h; ++i) {
          const double g = fb.gamma[t * h + i];
          for (std::size_t d = 0; d < dim; ++d) {
            const double e = s[t][d] - m.emissions[i].mean[d];
            var_acc[i][d] += g * e * e;
          }
        }
      }
    }
    for (std::size_t i = 0; i < h; ++i) {
      if (occ[i] <= 0.0) continue;
      for (std::size_t d = 0; d < dim; ++d) {
        m.emissions[i].var[d] = std::max(var_acc[i][d] / occ[i], options.var_floor);
      }
    }
    ++res.iterations;
  }
  double ll = 0.0;
  for (const auto& s : sequences) ll += forward_backward(m, s, false).loglik;
  res.loglik_history.push_back(ll);
  return res;
}

GaussianMixture fit_gmm(const std::vector<Observation>& points, const GmmOptions& options) {
  if (points.empty()) throw Error(ErrorKind::EmptyData, "GMM needs at least one point");
  const std::size_t dim = points.front().size();
  for (const auto& p : points) check_dim(p, dim);
  const std::size_t k = std::max<std::size_t>(1, std::min(options.n_components, points.size()));
  GaussianMixture gmm;
  gmm.weights.assign(k, 1.0 / static_cast<double>(k));
  gmm.components = quantile_init(points, k, options.var_floor, options.seed);

  const std::size_t n = points.size();
  std::vector<double> resp(n * k);
  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iter; ++it) {
    double ll = 0.0;
    std::vector<double> terms(k);
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t c = 0; c < k; ++c) {
        terms[c] = std::log(gmm.weights[c]) + gmm.components[c].log_density(points[p]);
      }
      const double lse = log_sum_exp(terms);
      ll += lse;
      for (std::size_t c = 0; c < k; ++c) resp[p * k + c] = std::exp(terms[c] - lse);
    }
    if (it > 0 && ll - prev < options.tol) break;
    prev = ll;
    for (std::size_t c = 0; c < k; ++c) {
      double nk = 0.0;
      std::vector<double> mu(dim, 0.0);
      for (std::size_t p = 0; p < n; ++p) {
        nk += resp[p * k + c];
        for (std::size_t d = 0; d < dim; ++d) mu[d] += resp[p * k + c] * points[p][d];
      }
      if (nk <= 0.0) continue;
      std::vector<double> var(dim, 0.0);
      for (std::size_t d = 0; d < dim; ++d) mu[d] /= nk;
      for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t d = 0; d < dim; ++d) {
          const double e = points[p][d] - mu[d];
          var[d] += resp[p * k + c] * e * e;
        }
      }
      for (std::size_t d = 0; d < dim; ++d) var[d] = std::max(var[d] / nk, options.var_floor);
      gmm.weights[c] = nk / static_cast<double>(n);
      gmm.components[c].mean = std::move(mu);
      gmm.components[c].var = std::move(var);
    }
    double wsum = std::accumulate(gmm.weights.begin(), gmm.weights.end(), 0.0);
    for (double& w : gmm.weights) w /= wsum;
  }
  return gmm;
}

Sequence observation_sequence(const SceneSample& sample) {
  const Trajectory& host = sample.host_history();
  const Trajectory& target = sample.target_history();
  const std::size_t n = std::min(host.size(), target.size());
  Sequence seq;
  seq.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& hp = host.points[i];
    const auto& tp = target.points[i];
    seq.push_back({host.rear_x(i) - target.front_x(i), hp.v - tp.v, tp.a, hp.y - tp.y});
  }
  return seq;
}

Observation trajectory_descriptor(const Trajectory& traj, double horizon) {
  const auto steps = static_cast<std::size_t>(std::llround(horizon / traj.dt));
  Observation d;
  for (std::size_t part = 1; part <= 3; ++part) {
    const std::size_t idx = std::min(traj.size() - 1, part * steps / 3);
    d.push_back(traj.points[idx].x - traj.points[0].x);
  }
  return d;
}

HmmPredictorModel fit_hmm_predictor(std::span<const SceneSample> samples, const BaumWelchOptions& hmm_options,
                                    const GmmOptions& gmm_options) {
  HmmPredictorModel model;
  model.hmm_options = hmm_options;
  model.gmm_options = gmm_options;
  for (int situation : {1, 2}) {
    std::vector<Sequence> seqs;
    std::vector<Observation> descriptors;
    for (const auto& s : samples) {
      if (s.situation != situation) continue;
      seqs.push_back(observation_sequence(s));
      descriptors.push_back(trajectory_descriptor(s.future_predicted, s.horizon));
    }
    if (seqs.empty()) {
      throw Error(ErrorKind::EmptyData, "no training samples for situation " + std::to_string(situation));
    }
    auto bw = baum_welch(seqs, hmm_options);
    model.training_loglik.push_back(bw.loglik_history);
    model.situations.push_back({situation, std::move(bw.model), fit_gmm(descriptors, gmm_options)});
  }
  return model;
}

std::vector<double> situation_posterior(const HmmPredictorModel& model, const SceneSample& sample) {
  const auto seq = observation_sequence(sample);
  std::vector<double> ll;
  for (const auto& s : model.situations) ll.push_back(forward_loglik(s.hmm, seq));
  return softmax(ll).probs;
}

PredictionDistribution predict_hmm(const HmmPredictorModel& model, const SceneSample& sample,
                                   const protogen::PrototypeSet& protos) {
  const auto posterior = situation_posterior(model, sample);
  std::vector<double> logits;
  logits.reserve(protos.size());
  for (const auto& proto : protos.prototypes) {
    const auto desc = trajectory_descriptor(proto.trajectory, protos.horizon);
    std::vector<double> terms;
    for (std::size_t k = 0; k < model.situations.size(); ++k) {
      terms.push_back(std::log(posterior[k]) + model.situations[k].gmm.log_density(desc));
    }
    logits.push_back(log_sum_exp(terms));
  }
  return softmax(logits);
}

namespace {

nlohmann::json gaussians_json(const std::vector<DiagGaussian>& gs) {
  nlohmann::json means = nlohmann::json::array();
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& g : gs) {
    means.push_back(g.mean);
    vars.push_back(g.var);
  }
  return {{"means", means}, {"vars", vars}};
}

std::vector<DiagGaussian> gaussians_from(const nlohmann::json& j) {
  std::vector<DiagGaussian> out;
  const auto& means = j.at("means");
  const auto& vars = j.at("vars");
  for (std::size_t i = 0; i < means.size(); ++i) {
    out.push_back({means[i].get<std::vector<double>>(), vars[i].get<std::vector<double>>()});
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const HmmPredictorModel& model) {
  nlohmann::json sits = nlohmann::json::array();
  for (const auto& s : model.situations) {
    sits.push_back({{"id", s.situation_id},
                    {"hmm",
                     {{"n_states", s.hmm.n_states},
                      {"initial", s.hmm.initial},
                      {"transition", s.hmm.transition},
                      {"emissions", gaussians_json(s.hmm.emissions)}}},
                    {"gmm", {{"weights", s.gmm.weights}, {"components", gaussians_json(s.gmm.components)}}}});
  }
  return {{"kind", "hmm"},
          {"version", 1},
          {"features", {"gap_to_merge_point", "relative_speed", "target_accel", "host_lateral_offset"}},
          {"descriptor", {"disp_1_3_horizon", "disp_2_3_horizon", "disp_horizon"}},
          {"options",
           {{"n_states", model.hmm_options.n_states},
            {"seed", model.hmm_options.seed},
            {"max_iter", model.hmm_options.max_iter},
            {"tol", model.hmm_options.tol},
            {"var_floor", model.hmm_options.var_floor},
            {"gmm_components", model.gmm_options.n_components},
            {"gmm_seed", model.gmm_options.seed}}},
          {"situations", sits},
          {"training_loglik", model.training_loglik}};
}

HmmPredictorModel hmm_model_from_json(const nlohmann::json& j) {
  if (j.at("kind") != "hmm" || j.at("version") != 1) {
    throw Error(ErrorKind::ParseError, "not a version-1 hmm model document");
  }
  HmmPredictorModel m;
  const auto& o = j.at("options");
  m.hmm_options.n_states = o.at("n_states");
  m.hmm_options.seed = o.at("seed");
  m.hmm_options.max_iter = o.at("max_iter");
  m.hmm_options.tol = o.at("tol");
  m.hmm_options.var_floor = o.at("var_floor");
  m.gmm_options.n_components = o.at("gmm_components");
  m.gmm_options.seed = o.at("gmm_seed");
  for (const auto& s : j.at("situations")) {
    SituationModel sm;
    sm.situation_id = s.at("id");
    const auto& h = s.at("hmm");
    sm.hmm.n_states = h.at("n_states");
    sm.hmm.initial = h.at("initial").get<std::vector<double>>();
    sm.hmm.transition = h.at("transition").get<std::vector<double>>();
    sm.hmm.emissions = gaussians_from(h.at("emissions"));
    sm.hmm.validate();
    sm.gmm.weights = s.at("gmm").at("weights").get<std::vector<double>>();
    sm.gmm.components = gaussians_from(s.at("gmm").at("components"));
    m.situations.push_back(std::move(sm));
  }
  m.training_loglik = j.at("training_loglik").get<std::vector<std::vector<double>>>();
  return m;
}

}  // namespace rxbench::hmm
