// Command-line front end for the reaction prediction benchmark.

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rxbench/bench.hpp"

namespace {

std::vector<std::filesystem::path> split_paths(const std::string& list) {
  std::vector<std::filesystem::path> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.emplace_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  namespace bench = rxbench::bench;
  CLI::App app{"Reaction prediction benchmark with criticality-aware scores"};
  app.require_subcommand(1);
  app.set_version_flag("--version", bench::kToolVersion);

  std::string config, out, data, method, models, preds;
  std::vector<std::string> overrides;

  auto* gen = app.add_subcommand("gen-data", "Simulate merge episodes and write a dataset archive");
  gen->add_option("--config", config, "Benchmark config JSON")->required();
  gen->add_option("--out", out, "Output dataset directory")->required();
  gen->add_option("--set", overrides, "Config override key.path=value (repeatable)");

  auto* fit = app.add_subcommand("fit", "Train one predictor on the training split");
  fit->add_option("--method", method, "hmm, mdn or irl")->required()->check(CLI::IsMember({"hmm", "mdn", "irl"}));
  fit->add_option("--data", data, "Dataset directory")->required();
  fit->add_option("--out", out, "Model JSON file")->required();
  fit->add_option("--config", config, "Config JSON replacing the one stored with the dataset");
  fit->add_option("--set", overrides, "Config override key.path=value (repeatable)");

  auto* eval = app.add_subcommand("eval", "Score models and baselines on the test split");
  eval->add_option("--models", models, "Comma-separated model files")->required();
  eval->add_option("--data", data, "Dataset directory")->required();
  eval->add_option("--out", out, "Report directory")->required();

  auto* oracle = app.add_subcommand("oracle", "Recompute the scores of a predictions file independently");
  oracle->add_option("--data", data, "Dataset directory")->required();
  oracle->add_option("--preds", preds, "predictions.json written by eval")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : bench::kExitConfig;
  }

  if (gen->parsed()) return bench::cmd_gen_data(config, out, overrides, std::cerr);
  if (fit->parsed()) return bench::cmd_fit(method, data, out, config, overrides, std::cerr);
  if (eval->parsed()) return bench::cmd_eval(split_paths(models), data, out, std::cerr);
  return bench::cmd_oracle(data, preds, std::cerr);
}
