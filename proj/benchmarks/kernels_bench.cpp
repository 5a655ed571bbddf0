// Wall-clock comparison of the OpenMP kernels against their serial references.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

#include <omp.h>

#include "rxbench/bench.hpp"
#include "rxbench/random.hpp"

namespace {

using rxbench::uniform;

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-22s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

rxbench::metrics::EvaluationSet random_eval(std::size_t n, std::mt19937_64& rng) {
  rxbench::metrics::EvaluationSet set;
  set.m = 4;
  for (std::size_t i = 0; i < n; ++i) {
    rxbench::metrics::EvaluationRecord r;
    r.sample_id = static_cast<int>(i);
    r.gt_pattern = 1 + static_cast<int>(rng() % 4);
    double total = 0.0;
    for (int j = 0; j < 4; ++j) {
      r.probs.push_back(uniform(rng, 0.01, 1.0));
      total += r.probs.back();
      r.cr.push_back(uniform(rng, 0.0, 10.0));
    }
    for (double& p : r.probs) p /= total;
    set.records.push_back(std::move(r));
  }
  return set;
}

}  // namespace

int main() {
  namespace rx = rxbench;
  std::printf("threads: %d\n", omp_get_max_threads());
  std::mt19937_64 rng(7);

  const auto eval = random_eval(200000, rng);
  report("metrics (2e5 samples)", time_ms([&] { rx::metrics::serial::fatality_aware(eval); }, 5),
         time_ms([&] { rx::metrics::fatality_aware(eval); }, 5));

  auto model = rx::mdn::make_mdn(rx::mdn::kStateDim, std::vector<std::size_t>{16, 16}, 3, 1);
  std::vector<rx::mdn::MdnExample> data(20000);
  for (auto& ex : data) {
    for (std::size_t k = 0; k < rx::mdn::kStateDim; ++k) ex.state.push_back(rx::standard_normal(rng));
    ex.action = rx::standard_normal(rng);
  }
  report("mdn nll+grad (2e4)", time_ms([&] { rx::mdn::serial::mdn_nll(model, data); }, 5),
         time_ms([&] { rx::mdn::mdn_nll(model, data); }, 5));

  rx::bench::BenchConfig cfg;
  cfg.episodes = 40;
  std::vector<rx::SceneSample> samples;
  for (const auto& ep : rx::bench::generate_episodes(cfg)) {
    auto w = rx::datagen::window_samples(ep, cfg.scenario, rx::default_patterns(), cfg.limits);
    samples.insert(samples.end(), w.begin(), w.end());
  }
  const auto patterns = rx::default_patterns();
  report("prototypes+criticality",
         time_ms([&] { rx::pipeline::serial::prepare(samples, patterns, cfg.limits, cfg.cr_max); }, 3),
         time_ms([&] { rx::pipeline::prepare(samples, patterns, cfg.limits, cfg.cr_max); }, 3));
  return 0;
}
