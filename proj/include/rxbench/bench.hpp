#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rxbench/baselines.hpp"
#include "rxbench/datagen.hpp"
#include "rxbench/hmm.hpp"
#include "rxbench/irl.hpp"
#include "rxbench/mdn.hpp"
#include "rxbench/metrics.hpp"
#include "rxbench/pipeline.hpp"
#include "rxbench/protogen.hpp"

namespace rxbench::bench {

inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitIo = 3,
  kExitDivergence = 4,
  kExitIdentity = 5,
  kExitOracle = 6,
};

/// Maps an error to the command exit code.
int exit_code_for(const Error& e);

inline constexpr double kIdentityTolerance = 1e-12;
inline constexpr double kOracleTolerance = 1e-10;

struct BenchConfig {
  datagen::ScenarioConfig scenario;
  std::uint64_t seed = 1;
  int episodes = 240;
  double train_fraction = 0.7;
  std::vector<std::string> methods = {"hmm", "mdn", "irl", "uniform", "oracle-bayes", "adversarial"};
  double cr_max = criticality::kDefaultCrMax;
  protogen::PlannerLimits limits;
  hmm::BaumWelchOptions hmm;
  hmm::GmmOptions gmm;
  mdn::MdnTrainOptions mdn;
  irl::IrlTrainOptions irl;
  irl::FeatureConfig irl_features;
  baselines::OracleOptions oracle;

  void validate() const;
};

nlohmann::json to_json(const BenchConfig& c);
/// Missing keys keep their defaults; throws ConfigInvalid.
BenchConfig config_from_json(const nlohmann::json& j);
BenchConfig load_config(const std::filesystem::path& path);

/// Applies "a.b.c=value" overrides; the value is parsed as JSON, falling back
/// to a plain string.
nlohmann::json apply_overrides(nlohmann::json j, const std::vector<std::string>& overrides);

/// 64-bit FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

/// Dataset windowed into samples and split into train/test.
struct PreparedData {
  BenchConfig config;
  datagen::Dataset dataset;
  std::vector<SceneSample> train;
  std::vector<SceneSample> test;
};

PreparedData load_prepared(const std::filesystem::path& data_dir);

/// Simulates config.episodes episodes (in parallel, seeded per episode).
std::vector<datagen::Episode> generate_episodes(const BenchConfig& config);

struct MethodResult {
  std::string method;
  metrics::EvaluationSet eval;
  metrics::MetricReport report;
};

/// Max |B_c - (G + C + D)| style discrepancy of a report against the
/// separately computed components.
double identity_residual(const metrics::EvaluationSet& eval, const metrics::MetricReport& report);

int cmd_gen_data(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                 const std::vector<std::string>& overrides, std::ostream& log);
int cmd_fit(const std::string& method, const std::filesystem::path& data_dir, const std::filesystem::path& out_file,
            const std::filesystem::path& config_path, const std::vector<std::string>& overrides, std::ostream& log);
int cmd_eval(const std::vector<std::filesystem::path>& models, const std::filesystem::path& data_dir,
             const std::filesystem::path& out_dir, std::ostream& log);
int cmd_oracle(const std::filesystem::path& data_dir, const std::filesystem::path& preds_file, std::ostream& log);

struct OracleSummary {
  double max_deviation = 0.0;
  std::map<std::string, metrics::MetricReport> recomputed;
};

/// Direct-summation recomputation of the five scores from a predictions
/// document, checked against the dataset. Throws InvalidArgument naming the
/// offending sample.
OracleSummary verify_predictions(const PreparedData& data, const nlohmann::json& predictions);

}  // namespace rxbench::bench
