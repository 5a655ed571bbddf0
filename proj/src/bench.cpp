#include "rxbench/bench.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <set>
#include <unordered_map>

#include "rxbench/error.hpp"
#include "rxbench/random.hpp"

namespace rxbench::bench {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::ConfigInvalid:
    case ErrorKind::TooFewEpisodes:
    case ErrorKind::EpisodeTooShort:
      return kExitConfig;
    case ErrorKind::Io:
    case ErrorKind::ParseError:
    case ErrorKind::UnitError:
      return kExitIo;
    case ErrorKind::Divergence:
      return kExitDivergence;
    default:
      return kExitFailure;
  }
}

namespace {

const std::set<std::string> kModelMethods = {"hmm", "mdn", "irl"};
const std::set<std::string> kBaselineMethods = {"uniform", "oracle-bayes", "adversarial"};

void config_require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::ConfigInvalid, what);
}

json read_json_file(const fs::path& path, ErrorKind missing_kind) {
  std::ifstream in(path);
  if (!in) throw Error(missing_kind, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(missing_kind == ErrorKind::ConfigInvalid ? ErrorKind::ConfigInvalid : ErrorKind::ParseError,
                path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::Io, "cannot create " + dir.string());
}

json report_json(const metrics::MetricReport& r) {
  return {{"B", r.B}, {"G", r.G}, {"C", r.C}, {"D", r.D}, {"B_c", r.B_c}};
}

metrics::MetricReport report_from(const json& j) {
  metrics::MetricReport r;
  r.B = j.at("B").get<double>();
  r.G = j.at("G").get<double>();
  r.C = j.at("C").get<double>();
  r.D = j.at("D").get<double>();
  r.B_c = j.at("B_c").get<double>();
  return r;
}

std::uint64_t episode_seed(std::uint64_t seed, int index) {
  return splitmix64(seed * 0x100000001b3ULL + static_cast<std::uint64_t>(index));
}

}  // namespace

void BenchConfig::validate() const {
  scenario.validate();
  config_require(episodes >= 1, "episodes must be at least 1");
  config_require(train_fraction > 0.0 && train_fraction < 1.0, "train_fraction must lie in (0, 1)");
  config_require(!methods.empty(), "methods must not be empty");
  for (const auto& m : methods) {
    config_require(kModelMethods.count(m) || kBaselineMethods.count(m), "unknown method '" + m + "'");
  }
  config_require(std::isfinite(cr_max) && cr_max > 0.0, "cr_max must be positive");
  try {
    limits.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigInvalid, e.what());
  }
  config_require(hmm.n_states >= 1 && hmm.max_iter >= 1 && hmm.tol >= 0.0 && hmm.var_floor > 0.0,
                 "invalid hmm options");
  config_require(gmm.n_components >= 1 && gmm.max_iter >= 1 && gmm.tol >= 0.0, "invalid gmm options");
  config_require(std::isfinite(mdn.lr) && mdn.lr >= 0.0 && mdn.epochs >= 1 && mdn.batch >= 1 &&
                     mdn.n_components >= 1 && !mdn.hidden.empty(),
                 "invalid mdn options");
  for (auto h : mdn.hidden) config_require(h >= 1, "mdn hidden layers need at least one unit");
  config_require(std::isfinite(irl.lr) && irl.lr >= 0.0 && irl.iters >= 0 && irl.max_halvings >= 0,
                 "invalid irl options");
  config_require(irl_features.desired_speed > 0.0 && irl_features.gap_scale > 0.0, "invalid irl features");
  config_require(oracle.rollouts >= 1 && oracle.smoothing >= 0.0, "invalid oracle options");
}

json to_json(const BenchConfig& c) {
  return {
      {"seed", c.seed},
      {"episodes", c.episodes},
      {"train_fraction", c.train_fraction},
      {"methods", c.methods},
      {"metric", {{"cr_max", c.cr_max}}},
      {"scenario", datagen::to_json(c.scenario)},
      {"planner", {{"a_min", c.limits.a_min}, {"a_max", c.limits.a_max}, {"v_max", c.limits.v_max},
                   {"j_max", c.limits.j_max}}},
      {"hmm", {{"n_states", c.hmm.n_states}, {"max_iter", c.hmm.max_iter}, {"tol", c.hmm.tol},
               {"var_floor", c.hmm.var_floor}, {"gmm_components", c.gmm.n_components},
               {"gmm_max_iter", c.gmm.max_iter}, {"gmm_tol", c.gmm.tol}}},
      {"mdn", {{"lr", c.mdn.lr}, {"epochs", c.mdn.epochs}, {"batch", c.mdn.batch}, {"hidden", c.mdn.hidden},
               {"components", c.mdn.n_components}}},
      {"irl", {{"lr", c.irl.lr}, {"iters", c.irl.iters}, {"tol", c.irl.tol}, {"max_halvings", c.irl.max_halvings},
               {"desired_speed", c.irl_features.desired_speed}, {"gap_scale", c.irl_features.gap_scale}}},
      {"oracle", {{"rollouts", c.oracle.rollouts}, {"smoothing", c.oracle.smoothing}}},
  };
}

BenchConfig config_from_json(const json& j) {
  BenchConfig c;
  try {
    config_require(j.is_object(), "config must be a JSON object");
    c.seed = j.value("seed", c.seed);
    c.episodes = j.value("episodes", c.episodes);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
    if (j.contains("metric")) c.cr_max = j.at("metric").value("cr_max", c.cr_max);
    json scenario = j.value("scenario", json::object());
    scenario["seed"] = c.seed;
    c.scenario = datagen::scenario_from_json(scenario);
    if (j.contains("planner")) {
      const auto& p = j.at("planner");
      c.limits.a_min = p.value("a_min", c.limits.a_min);
      c.limits.a_max = p.value("a_max", c.limits.a_max);
      c.limits.v_max = p.value("v_max", c.limits.v_max);
      c.limits.j_max = p.value("j_max", c.limits.j_max);
    }
    if (j.contains("hmm")) {
      const auto& h = j.at("hmm");
      c.hmm.n_states = h.value("n_states", c.hmm.n_states);
      c.hmm.max_iter = h.value("max_iter", c.hmm.max_iter);
      c.hmm.tol = h.value("tol", c.hmm.tol);
      c.hmm.var_floor = h.value("var_floor", c.hmm.var_floor);
      c.gmm.n_components = h.value("gmm_components", c.gmm.n_components);
      c.gmm.max_iter = h.value("gmm_max_iter", c.gmm.max_iter);
      c.gmm.tol = h.value("gmm_tol", c.gmm.tol);
      c.gmm.var_floor = c.hmm.var_floor;
    }
    if (j.contains("mdn")) {
      const auto& m = j.at("mdn");
      c.mdn.lr = m.value("lr", c.mdn.lr);
      c.mdn.epochs = m.value("epochs", c.mdn.epochs);
      c.mdn.batch = m.value("batch", c.mdn.batch);
      if (m.contains("hidden")) c.mdn.hidden = m.at("hidden").get<std::vector<std::size_t>>();
      c.mdn.n_components = m.value("components", c.mdn.n_components);
    }
    c.irl_features.desired_speed = c.scenario.speed_limit;
    if (j.contains("irl")) {
      const auto& i = j.at("irl");
      c.irl.lr = i.value("lr", c.irl.lr);
      c.irl.iters = i.value("iters", c.irl.iters);
      c.irl.tol = i.value("tol", c.irl.tol);
      c.irl.max_halvings = i.value("max_halvings", c.irl.max_halvings);
      c.irl_features.desired_speed = i.value("desired_speed", c.irl_features.desired_speed);
      c.irl_features.gap_scale = i.value("gap_scale", c.irl_features.gap_scale);
    }
    if (j.contains("oracle")) {
      const auto& o = j.at("oracle");
      c.oracle.rollouts = o.value("rollouts", c.oracle.rollouts);
      c.oracle.smoothing = o.value("smoothing", c.oracle.smoothing);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigInvalid, e.what());
  }
  c.hmm.seed = c.gmm.seed = c.mdn.seed = c.irl.seed = c.oracle.seed = c.seed;
  c.validate();
  return c;
}

BenchConfig load_config(const fs::path& path) {
  return config_from_json(read_json_file(path, ErrorKind::ConfigInvalid));
}

json apply_overrides(json j, const std::vector<std::string>& overrides) {
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    config_require(eq != std::string::npos && eq > 0, "override '" + item + "' must look like key=value");
    std::string pointer = "/" + item.substr(0, eq);
    std::replace(pointer.begin(), pointer.end(), '.', '/');
    const std::string text = item.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::exception&) {
      value = text;
    }
    try {
      j[json::json_pointer(pointer)] = value;
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ConfigInvalid, "override '" + item + "': " + e.what());
    }
  }
  return j;
}

std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

std::vector<datagen::Episode> generate_episodes(const BenchConfig& config) {
  config.validate();
  std::vector<datagen::Episode> out(static_cast<std::size_t>(config.episodes));
  pipeline::parallel_for(out.size(), [&](std::size_t i) {
    const int id = static_cast<int>(i) + 1;
    out[i] = datagen::simulate_episode(config.scenario, episode_seed(config.seed, id), id);
  });
  return out;
}

PreparedData load_prepared(const fs::path& data_dir) {
  PreparedData p;
  p.dataset = datagen::read_dataset(data_dir);
  const auto& meta = p.dataset.manifest;
  if (!meta.contains("config") || !meta.at("config").contains("bench")) {
    throw Error(ErrorKind::ConfigInvalid, "dataset manifest carries no benchmark config");
  }
  p.config = config_from_json(meta.at("config").at("bench"));
  p.config.scenario = p.dataset.scenario;
  const auto patterns = default_patterns();
  std::vector<std::vector<SceneSample>> per_episode(p.dataset.episodes.size());
  pipeline::parallel_for(per_episode.size(), [&](std::size_t i) {
    per_episode[i] = datagen::window_samples(p.dataset.episodes[i], p.config.scenario, patterns, p.config.limits);
  });
  std::vector<SceneSample> all;
  for (auto& v : per_episode) std::move(v.begin(), v.end(), std::back_inserter(all));
  auto parts = datagen::split(all, p.config.train_fraction, p.config.seed);
  p.train = std::move(parts.train);
  p.test = std::move(parts.test);
  return p;
}

double identity_residual(const metrics::EvaluationSet& eval, const metrics::MetricReport& report) {
  const double g = metrics::serial::ground_truth_term(eval);
  const double c = metrics::serial::conservatism(eval);
  const double d = metrics::serial::non_defensiveness(eval);
  double residual = std::abs(report.B_c - (g + c + d));
  residual = std::max(residual, std::abs(report.B_c - (report.G + report.C + report.D)));
  return residual;
}

int cmd_gen_data(const fs::path& config_path, const fs::path& out_dir, const std::vector<std::string>& overrides,
                 std::ostream& log) {
  try {
    const json raw = apply_overrides(read_json_file(config_path, ErrorKind::ConfigInvalid), overrides);
    const BenchConfig cfg = config_from_json(raw);
    const auto episodes = generate_episodes(cfg);
    const json cj = to_json(cfg);
    ensure_dir(out_dir);
    datagen::write_dataset(out_dir, cfg.scenario, episodes,
                           {{"bench", cj}, {"config_hash", config_hash(cj)}, {"tool_version", kToolVersion}});
    int merged = 0, ahead = 0, aborted = 0;
    for (const auto& e : episodes) {
      merged += e.merge_success_time.has_value();
      ahead += e.host_merged_ahead;
      aborted += e.aborted;
    }
    log << "wrote " << episodes.size() << " episodes to " << out_dir.string() << " (" << merged << " merged, "
        << ahead << " ahead of the target, " << aborted << " aborted)\n";
    return kExitOk;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

int cmd_fit(const std::string& method, const fs::path& data_dir, const fs::path& out_file,
            const fs::path& config_path, const std::vector<std::string>& overrides, std::ostream& log) {
  try {
    if (!kModelMethods.count(method)) throw Error(ErrorKind::ConfigInvalid, "unknown method '" + method + "'");
    const PreparedData data = load_prepared(data_dir);
    json raw = config_path.empty() ? to_json(data.config) : read_json_file(config_path, ErrorKind::ConfigInvalid);
    BenchConfig cfg = config_from_json(apply_overrides(std::move(raw), overrides));
    cfg.scenario = data.config.scenario;
    const auto& train = data.train;
    log << "fitting " << method << " on " << train.size() << " training samples\n";

    json model;
    std::string training_log;
    if (method == "hmm") {
      const auto fitted = hmm::fit_hmm_predictor(train, cfg.hmm, cfg.gmm);
      model = hmm::to_json(fitted);
      training_log = "situation,iteration,loglik\n";
      for (std::size_t k = 0; k < fitted.training_loglik.size(); ++k) {
        const auto& hist = fitted.training_loglik[k];
        for (std::size_t it = 0; it < hist.size(); ++it) {
          char buf[96];
          std::snprintf(buf, sizeof buf, "%d,%zu,%.10g\n", fitted.situations[k].situation_id, it, hist[it]);
          training_log += buf;
        }
      }
    } else if (method == "mdn") {
      std::vector<mdn::MdnExample> examples;
      for (const auto& s : train) {
        const Trajectory& hist = s.target_history();
        const std::size_t h = hist.size();
        const double prev = h >= 2 ? (hist.points[h - 1].v - hist.points[h - 2].v) / hist.dt : hist.back().a;
        auto ex = mdn::rollout_examples(s.future_host, s.future_predicted, cfg.scenario.ramp_end_x, prev);
        std::move(ex.begin(), ex.end(), std::back_inserter(examples));
      }
      auto init = mdn::make_mdn(mdn::kStateDim, cfg.mdn.hidden, cfg.mdn.n_components, cfg.mdn.seed);
      mdn::fit_normalization(init, examples);
      init.ramp_end_x = cfg.scenario.ramp_end_x;
      init.dt = cfg.scenario.dt;
      const auto res = mdn::train_mdn(examples, std::move(init), cfg.mdn);
      model = mdn::to_json(res.model, cfg.mdn, res.loss_history);
      training_log = "epoch,mean_nll\n";
      for (std::size_t e = 0; e < res.loss_history.size(); ++e) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%zu,%.10g\n", e, res.loss_history[e]);
        training_log += buf;
      }
    } else {
      const auto contexts = pipeline::prepare(train, default_patterns(), cfg.limits, cfg.cr_max);
      std::vector<protogen::PrototypeSet> protos;
      protos.reserve(contexts.size());
      for (const auto& c : contexts) protos.push_back(c.protos);
      const auto res = irl::fit_irl(train, protos, cfg.irl_features, cfg.irl);
      model = irl::to_json(res.model, cfg.irl, res.loglik_history);
      training_log = "iteration,loglik\n";
      for (std::size_t it = 0; it < res.loglik_history.size(); ++it) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%zu,%.10g\n", it, res.loglik_history[it]);
        training_log += buf;
      }
    }
    model["tool_version"] = kToolVersion;
    model["config_hash"] = config_hash(to_json(cfg));
    if (out_file.has_parent_path()) ensure_dir(out_file.parent_path());
    write_text(out_file, model.dump(2) + "\n");
    write_text(fs::path(out_file.string() + ".log.csv"), training_log);
    log << training_log;
    log << "model written to " << out_file.string() << "\n";
    return kExitOk;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

namespace {

struct NamedPredictor {
  std::string method;
  pipeline::Predictor predict;
};

NamedPredictor load_model_predictor(const fs::path& path) {
  const json j = read_json_file(path, ErrorKind::Io);
  const std::string kind = j.value("kind", "");
  try {
    if (kind == "hmm") {
      auto m = std::make_shared<const hmm::HmmPredictorModel>(hmm::hmm_model_from_json(j));
      return {"hmm", [m](std::size_t, const SceneSample& s, const pipeline::SceneContext& c) {
                return hmm::predict_hmm(*m, s, c.protos);
              }};
    }
    if (kind == "mdn") {
      auto m = std::make_shared<const mdn::MdnModel>(mdn::mdn_model_from_json(j));
      return {"mdn", [m](std::size_t, const SceneSample& s, const pipeline::SceneContext& c) {
                return mdn::predict_mdn(*m, s, c.protos);
              }};
    }
    if (kind == "irl") {
      auto m = std::make_shared<const irl::IrlModel>(irl::irl_model_from_json(j));
      return {"irl", [m](std::size_t, const SceneSample& s, const pipeline::SceneContext& c) {
                return irl::predict_irl(*m, s, c.protos);
              }};
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  throw Error(ErrorKind::ParseError, path.string() + ": unknown model kind '" + kind + "'");
}

NamedPredictor baseline_predictor(const std::string& method, const PreparedData& data) {
  if (method == "uniform") {
    return {method, [](std::size_t, const SceneSample&, const pipeline::SceneContext& c) {
              return baselines::uniform(c.protos.size());
            }};
  }
  if (method == "adversarial") {
    return {method, [](std::size_t, const SceneSample& s, const pipeline::SceneContext& c) {
              return baselines::adversarial(c.profile, s.gt_pattern);
            }};
  }
  auto latent = std::make_shared<std::unordered_map<int, std::pair<double, std::optional<double>>>>();
  for (const auto& e : data.dataset.episodes) {
    if (!e.yield_param) {
      throw Error(ErrorKind::ConfigInvalid, "oracle-bayes needs latent yield parameters; episode " +
                                                std::to_string(e.id) + " has none");
    }
    (*latent)[e.id] = {*e.yield_param, e.yield_onset_time};
  }
  const datagen::ScenarioConfig scenario = data.config.scenario;
  const baselines::OracleOptions options = data.config.oracle;
  return {method, [latent, scenario, options](std::size_t, const SceneSample& s, const pipeline::SceneContext& c) {
            const auto& [yield_param, onset] = latent->at(s.episode_id);
            const baselines::TargetLatent l{yield_param, onset.has_value() && *onset <= s.t0 + 1e-9};
            return baselines::oracle_bayes(s, c.protos, scenario, l, options);
          }};
}

}  // namespace

int cmd_eval(const std::vector<fs::path>& models, const fs::path& data_dir, const fs::path& out_dir,
             std::ostream& log) {
  try {
    const PreparedData data = load_prepared(data_dir);
    const BenchConfig& cfg = data.config;
    std::vector<NamedPredictor> predictors;
    for (const auto& path : models) predictors.push_back(load_model_predictor(path));
    for (const auto& m : cfg.methods) {
      if (kBaselineMethods.count(m)) predictors.push_back(baseline_predictor(m, data));
    }
    if (predictors.empty()) throw Error(ErrorKind::ConfigInvalid, "nothing to evaluate");

    const auto contexts = pipeline::prepare(data.test, default_patterns(), cfg.limits, cfg.cr_max);
    const std::string hash = config_hash(to_json(cfg));
    std::string csv = metrics::csv_header() + "\n";
    json methods_report = json::array();
    json methods_preds = json::array();
    for (const auto& p : predictors) {
      const auto eval = pipeline::evaluate(data.test, contexts, p.predict);
      const auto report = metrics::fatality_aware(eval);
      const double residual = identity_residual(eval, report);
      if (!(residual <= kIdentityTolerance)) {
        log << "error: " << p.method << " violates B_c = G + C + D by " << residual << "\n";
        return kExitIdentity;
      }
      csv += metrics::csv_row(p.method, report) + "\n";
      json rj = report_json(report);
      rj["method"] = p.method;
      methods_report.push_back(rj);
      json samples = json::array();
      for (const auto& r : eval.records) {
        samples.push_back({{"sample_id", r.sample_id}, {"gt", r.gt_pattern}, {"probs", r.probs}, {"cr", r.cr}});
      }
      methods_preds.push_back({{"method", p.method}, {"report", report_json(report)}, {"samples", samples}});
    }
    const json header = {{"tool_version", kToolVersion},
                         {"config_hash", hash},
                         {"m", contexts.empty() ? 0 : contexts.front().protos.size()},
                         {"horizon", cfg.scenario.t_h},
                         {"n_test_samples", data.test.size()},
                         {"n_train_samples", data.train.size()}};
    json report_doc = header;
    report_doc["methods"] = methods_report;
    json preds_doc = header;
    preds_doc["methods"] = methods_preds;
    ensure_dir(out_dir);
    write_text(out_dir / "report.csv", csv);
    write_text(out_dir / "report.json", report_doc.dump(2) + "\n");
    write_text(out_dir / "predictions.json", preds_doc.dump() + "\n");
    log << "evaluated " << data.test.size() << " test samples\n" << csv;
    return kExitOk;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

OracleSummary verify_predictions(const PreparedData& data, const json& predictions) {
  const auto patterns = default_patterns();
  const auto contexts = pipeline::serial::prepare(data.test, patterns, data.config.limits, data.config.cr_max);
  std::unordered_map<int, std::size_t> index;
  for (std::size_t i = 0; i < data.test.size(); ++i) index[data.test[i].sample_id] = i;
  const std::size_t m = patterns.size();

  OracleSummary out;
  auto bad = [](const std::string& where, const std::string& what) {
    throw Error(ErrorKind::InvalidArgument, where + ": " + what);
  };
  try {
    for (const auto& method : predictions.at("methods")) {
      const std::string name = method.at("method").get<std::string>();
      const auto& samples = method.at("samples");
      if (samples.size() != data.test.size()) {
        bad(name, "expected " + std::to_string(data.test.size()) + " samples, found " +
                      std::to_string(samples.size()));
      }
      std::vector<bool> seen(data.test.size(), false);
      double b = 0.0, g = 0.0, c = 0.0, d = 0.0;
      for (const auto& s : samples) {
        const int id = s.at("sample_id").get<int>();
        const std::string where = name + " sample " + std::to_string(id);
        const auto it = index.find(id);
        if (it == index.end()) bad(where, "not a test sample of this dataset");
        if (seen[it->second]) bad(where, "listed twice");
        seen[it->second] = true;
        const SceneSample& truth = data.test[it->second];
        const int gt = s.at("gt").get<int>();
        if (gt != truth.gt_pattern) bad(where, "ground truth " + std::to_string(gt) + " does not match the dataset");
        const auto probs = s.at("probs").get<std::vector<double>>();
        const auto cr = s.at("cr").get<std::vector<double>>();
        if (probs.size() != m || cr.size() != m) bad(where, "expected " + std::to_string(m) + " patterns");
        double total = 0.0;
        for (double p : probs) {
          if (!(p >= 0.0 && p <= 1.0)) bad(where, "probability " + std::to_string(p) + " outside [0, 1]");
          total += p;
        }
        if (std::abs(total - 1.0) > kProbabilityTolerance) bad(where, "probabilities sum to " + std::to_string(total));
        const auto& expected_cr = contexts[it->second].profile.cr;
        for (std::size_t j = 0; j < m; ++j) {
          out.max_deviation = std::max(out.max_deviation, std::abs(cr[j] - expected_cr[j]));
        }

        // Patterns ranked by criticality; everything ranked strictly below the
        // ground truth is a missed threat, strictly above a false alarm.
        const std::size_t gi = static_cast<std::size_t>(gt - 1);
        std::vector<std::size_t> order(m);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t x, std::size_t y) { return expected_cr[x] < expected_cr[y]; });
        const double cr_g = expected_cr[gi];
        double spread = 0.0;
        for (std::size_t j : order) {
          if (j != gi) spread += std::abs(expected_cr[j] - cr_g);
        }
        for (std::size_t j = 0; j < m; ++j) {
          const double target = j == gi ? 1.0 : 0.0;
          b += (probs[j] - target) * (probs[j] - target);
        }
        g += (probs[gi] - 1.0) * (probs[gi] - 1.0);
        if (spread >= metrics::kDegenerateWeightSum) {
          for (std::size_t j : order) {
            if (expected_cr[j] < cr_g) d += (cr_g - expected_cr[j]) / spread * probs[j] * probs[j];
            if (expected_cr[j] > cr_g) c += (expected_cr[j] - cr_g) / spread * probs[j] * probs[j];
          }
        }
      }
      const double n = static_cast<double>(data.test.size());
      metrics::MetricReport r;
      r.B = b / (n * static_cast<double>(m));
      r.G = g / (n * static_cast<double>(m));
      r.C = c / n;
      r.D = d / n;
      r.B_c = r.G + r.C + r.D;
      const auto claimed = report_from(method.at("report"));
      for (auto [x, y] : {std::pair{r.B, claimed.B}, std::pair{r.G, claimed.G}, std::pair{r.C, claimed.C},
                          std::pair{r.D, claimed.D}, std::pair{r.B_c, claimed.B_c}}) {
        out.max_deviation = std::max(out.max_deviation, std::abs(x - y));
      }
      out.recomputed[name] = r;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("malformed predictions: ") + e.what());
  }
  return out;
}

int cmd_oracle(const fs::path& data_dir, const fs::path& preds_file, std::ostream& log) {
  PreparedData data;
  try {
    data = load_prepared(data_dir);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  try {
    json preds;
    {
      std::ifstream in(preds_file);
      if (!in) {
        log << "error: cannot open " << preds_file.string() << "\n";
        return kExitIo;
      }
      try {
        preds = json::parse(in);
      } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, preds_file.string() + ": " + e.what());
      }
    }
    const auto summary = verify_predictions(data, preds);
    for (const auto& [name, r] : summary.recomputed) log << metrics::csv_row(name, r) << "\n";
    char buf[96];
    std::snprintf(buf, sizeof buf, "max abs deviation %.3e\n", summary.max_deviation);
    log << buf;
    if (!(summary.max_deviation <= kOracleTolerance)) {
      log << "error: deviation exceeds " << kOracleTolerance << "\n";
      return kExitOracle;
    }
    return kExitOk;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitOracle;
  }
}

}  // namespace rxbench::bench
