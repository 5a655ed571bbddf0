#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rxbench/core.hpp"
#include "rxbench/criticality.hpp"

namespace rxbench::metrics {

// Samples whose criticality deviations sum below this contribute nothing to C and D.
inline constexpr double kDegenerateWeightSum = 1e-12;

struct EvaluationRecord {
  int sample_id = 0;
  int gt_pattern = 1;  // 1..M
  std::vector<double> probs;
  std::vector<double> cr;
};

struct EvaluationSet {
  std::size_t m = 4;
  double horizon = 3.0;
  std::vector<EvaluationRecord> records;

  std::size_t n_samples() const { return records.size(); }
  /// Every record must have M probabilities forming a simplex, M criticalities
  /// in [0, inf) and a ground-truth id in 1..M. Throws naming the sample.
  void validate() const;
};

EvaluationRecord make_record(const SceneSample& sample, const PredictionDistribution& dist,
                             const criticality::CriticalityProfile& profile);

struct MetricReport {
  double B = 0.0;
  double G = 0.0;
  double C = 0.0;
  double D = 0.0;
  double B_c = 0.0;
};

/// Unnormalized per-sample contributions; the set-level scores divide the
/// Brier-type sums by N_s*M and the weighted sums by N_s.
struct SampleTerms {
  double brier = 0.0;          // sum_j (P_j - O_j)^2
  double ground_truth = 0.0;   // (P_g - 1)^2
  double conservatism = 0.0;   // sum_{cr_j > cr_g} w_j P_j^2
  double non_defensive = 0.0;  // sum_{cr_j < cr_g} w_j P_j^2
};

SampleTerms sample_terms(const EvaluationRecord& rec);

// OpenMP kernels: per-sample terms in parallel, reduced in sample order.
double brier(const EvaluationSet& eval);
double ground_truth_term(const EvaluationSet& eval);
double conservatism(const EvaluationSet& eval);
double non_defensiveness(const EvaluationSet& eval);
MetricReport fatality_aware(const EvaluationSet& eval);

namespace serial {
// Single-threaded reference implementations of the same scores.
double brier(const EvaluationSet& eval);
double ground_truth_term(const EvaluationSet& eval);
double conservatism(const EvaluationSet& eval);
double non_defensiveness(const EvaluationSet& eval);
MetricReport fatality_aware(const EvaluationSet& eval);
}  // namespace serial

std::string csv_header();
std::string csv_row(const std::string& method, const MetricReport& r);

}  // namespace rxbench::metrics
