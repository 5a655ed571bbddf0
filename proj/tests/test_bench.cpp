#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rxbench/bench.hpp"

using namespace rxbench;
using namespace rxbench::bench;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kConfig = fs::path(RX_CONFIG_DIR) / "default.json";

int run(const std::string& args) {
  const std::string cmd = std::string(RX_BENCH_EXE) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

// One default dataset with all three models fitted and evaluated, shared by the suite.
class BenchRun : public ::testing::Test {
 protected:
  static fs::path root;

  static void SetUpTestSuite() {
    root = fs::temp_directory_path() / "rxbench_cli";
    fs::remove_all(root);
    fs::create_directories(root);
    std::ostringstream log;
    ASSERT_EQ(cmd_gen_data(kConfig, root / "data", {}, log), kExitOk) << log.str();
    for (const std::string m : {"hmm", "mdn", "irl"}) {
      ASSERT_EQ(cmd_fit(m, root / "data", root / (m + ".json"), {}, {}, log), kExitOk) << log.str();
    }
    ASSERT_EQ(cmd_eval({root / "hmm.json", root / "mdn.json", root / "irl.json"}, root / "data", root / "report", log),
              kExitOk)
        << log.str();
  }

  static json report_of(const std::string& method) {
    const auto rep = read_json(root / "report" / "report.json");
    for (const auto& r : rep.at("methods")) {
      if (r.at("method") == method) return r;
    }
    return {};
  }
};

fs::path BenchRun::root;

}  // namespace

TEST_F(BenchRun, DatasetIsDeterministic) {
  const auto manifest = read_json(root / "data" / "manifest.json");
  EXPECT_GE(manifest.at("episodes").size(), 100u);
  std::ostringstream log;
  ASSERT_EQ(cmd_gen_data(kConfig, root / "data2", {}, log), kExitOk);
  EXPECT_EQ(slurp(root / "data" / "manifest.json"), slurp(root / "data2" / "manifest.json"));
  EXPECT_EQ(slurp(root / "data" / "episode_7.csv"), slurp(root / "data2" / "episode_7.csv"));
}

TEST_F(BenchRun, HmmModelHasTwoSituations) {
  const auto m = read_json(root / "hmm.json");
  EXPECT_EQ(m.at("situations").size(), 2u);
  EXPECT_EQ(m.at("tool_version"), kToolVersion);
  EXPECT_TRUE(fs::exists(root / "hmm.json.log.csv"));
}

TEST_F(BenchRun, ZeroRateIrlKeepsInitialization) {
  EXPECT_EQ(run("fit --method irl --data " + (root / "data").string() + " --out " + (root / "irl0.json").string() +
                " --set irl.lr=0"),
            kExitOk);
  EXPECT_EQ(read_json(root / "irl0.json").at("theta"), json(std::vector<double>(5, 0.0)));
}

TEST_F(BenchRun, HugeRateMdnDiverges) {
  EXPECT_EQ(run("fit --method mdn --data " + (root / "data").string() + " --out " + (root / "mdnx.json").string() +
                " --set mdn.lr=1e6"),
            kExitDivergence);
}

TEST_F(BenchRun, BaselinesOrdered) {
  const auto uni = report_of("uniform");
  const auto orc = report_of("oracle-bayes");
  const auto adv = report_of("adversarial");
  EXPECT_NEAR(uni.at("B").get<double>(), 0.1875, 1e-15);
  EXPECT_LT(orc.at("B").get<double>(), uni.at("B").get<double>());
  EXPECT_GT(adv.at("B_c").get<double>(), uni.at("B_c").get<double>());
  const auto rep = read_json(root / "report" / "report.json");
  for (const auto& s : rep.at("methods")) {
    EXPECT_NEAR(s.at("B_c").get<double>(), s.at("G").get<double>() + s.at("C").get<double>() + s.at("D").get<double>(),
                1e-12);
  }
}

TEST_F(BenchRun, ReportIsSelfDescribing) {
  const auto rep = read_json(root / "report" / "report.json");
  EXPECT_EQ(rep.at("tool_version"), kToolVersion);
  EXPECT_EQ(rep.at("config_hash").get<std::string>().size(), 16u);
  const auto csv = slurp(root / "report" / "report.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,B,G,C,D,B_c");
  EXPECT_NE(csv.find("uniform,0.187500,"), std::string::npos);
}

TEST_F(BenchRun, EvalIsDeterministic) {
  std::ostringstream log;
  ASSERT_EQ(cmd_eval({root / "hmm.json", root / "mdn.json", root / "irl.json"}, root / "data", root / "report2", log),
            kExitOk);
  EXPECT_EQ(slurp(root / "report" / "report.csv"), slurp(root / "report2" / "report.csv"));
  EXPECT_EQ(slurp(root / "report" / "predictions.json"), slurp(root / "report2" / "predictions.json"));
}

TEST_F(BenchRun, OracleAgrees) {
  std::ostringstream log;
  EXPECT_EQ(cmd_oracle(root / "data", root / "report" / "predictions.json", log), kExitOk) << log.str();
  const auto data = load_prepared(root / "data");
  const auto summary = verify_predictions(data, read_json(root / "report" / "predictions.json"));
  EXPECT_LE(summary.max_deviation, 1e-12);
}

TEST_F(BenchRun, CorruptedPredictionNamed) {
  auto preds = read_json(root / "report" / "predictions.json");
  auto& sample = preds.at("methods").at(0).at("samples").at(3);
  sample.at("probs").at(0) = 1.5;
  const int id = sample.at("sample_id").get<int>();
  std::ofstream(root / "bad.json") << preds.dump();
  std::ostringstream log;
  EXPECT_EQ(cmd_oracle(root / "data", root / "bad.json", log), kExitOracle);
  EXPECT_NE(log.str().find(std::to_string(id)), std::string::npos) << log.str();
}

TEST_F(BenchRun, TamperedScoreDetected) {
  auto preds = read_json(root / "report" / "predictions.json");
  auto& sample = preds.at("methods").at(0).at("samples").at(0);
  auto& probs = sample.at("probs");
  // Move a little mass off the ground truth; the sum stays one and every entry stays valid.
  const auto gi = static_cast<std::size_t>(sample.at("gt").get<int>() - 1);
  const std::size_t other = gi == 0 ? 1 : 0;
  const double moved = 1e-3 * probs.at(gi).get<double>();
  probs.at(gi) = probs.at(gi).get<double>() - moved;
  probs.at(other) = probs.at(other).get<double>() + moved;
  // Keep the stored report; the recomputation must disagree with it.
  std::ofstream(root / "tampered.json") << preds.dump();
  std::ostringstream log;
  const int code = cmd_oracle(root / "data", root / "tampered.json", log);
  EXPECT_TRUE(code == kExitOracle) << log.str();
}

TEST(BenchCli, ExitCodes) {
  const auto root = fs::temp_directory_path() / "rxbench_cli_codes";
  fs::remove_all(root);
  fs::create_directories(root);
  EXPECT_EQ(run("gen-data --config " + kConfig.string() + " --out " + (root / "z").string() + " --set episodes=0"),
            kExitConfig);
  std::ofstream(root / "file") << "x";
  EXPECT_EQ(run("gen-data --config " + kConfig.string() + " --out " + (root / "file" / "sub").string() +
                " --set episodes=3"),
            kExitIo);
  EXPECT_EQ(run("gen-data --config " + (root / "missing.json").string() + " --out " + (root / "m").string()),
            kExitConfig);
  EXPECT_EQ(run("frobnicate"), kExitConfig);
  EXPECT_EQ(run("fit --method svm --data x --out y"), kExitConfig);
  EXPECT_EQ(run("oracle --data " + (root / "nope").string() + " --preds " + (root / "nope.json").string()), kExitIo);
  EXPECT_EQ(run("--version"), kExitOk);
}

TEST(BenchConfig, OverridesAndHash) {
  const json base = json::parse(slurp(kConfig));
  const auto changed = apply_overrides(base, {"mdn.lr=0.5", "methods=[\"uniform\"]", "scenario.seed=9"});
  EXPECT_EQ(changed.at("mdn").at("lr"), 0.5);
  EXPECT_EQ(changed.at("methods"), json::array({"uniform"}));
  EXPECT_NE(config_hash(base), config_hash(changed));
  EXPECT_EQ(config_hash(base), config_hash(json::parse(slurp(kConfig))));
  EXPECT_THROW(apply_overrides(base, {"no_equals_sign"}), Error);
  const auto c = config_from_json(base);
  EXPECT_EQ(c.episodes, 240);
  EXPECT_EQ(config_from_json(to_json(c)).episodes, 240);
  EXPECT_DOUBLE_EQ(c.irl_features.desired_speed, c.scenario.speed_limit);
  EXPECT_THROW(config_from_json(apply_overrides(base, {"methods=[]"})), Error);
  EXPECT_THROW(config_from_json(apply_overrides(base, {"methods=[\"magic\"]"})), Error);
}
