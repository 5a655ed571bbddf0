#include "rxbench/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace rxbench::metrics {

void EvaluationSet::validate() const {
  if (records.empty()) throw Error(ErrorKind::EmptyData, "evaluation set has no samples");
  if (m < 1) throw Error(ErrorKind::InvalidArgument, "evaluation set needs M >= 1");
  for (const auto& r : records) {
    const std::string where = "sample " + std::to_string(r.sample_id) + ": ";
    if (r.probs.size() != m || r.cr.size() != m) {
      throw Error(ErrorKind::DimensionMismatch, where + "expected " + std::to_string(m) + " patterns");
    }
    if (r.gt_pattern < 1 || static_cast<std::size_t>(r.gt_pattern) > m) {
      throw Error(ErrorKind::PatternOutOfRange, where + "ground-truth pattern out of range");
    }
    try {
      validate_distribution(PredictionDistribution{r.probs});
    } catch (const Error& e) {
      throw Error(ErrorKind::InvalidArgument, where + e.what());
    }
    for (double c : r.cr) {
      if (!(c >= 0.0) || !std::isfinite(c)) throw Error(ErrorKind::InvalidArgument, where + "invalid criticality");
    }
  }
}

EvaluationRecord make_record(const SceneSample& sample, const PredictionDistribution& dist,
                             const criticality::CriticalityProfile& profile) {
  return {sample.sample_id, sample.gt_pattern, dist.probs, profile.cr};
}

SampleTerms sample_terms(const EvaluationRecord& rec) {
  SampleTerms t;
  const auto g = static_cast<std::size_t>(rec.gt_pattern - 1);
  const double cr_g = rec.cr[g];
  double weight_sum = 0.0;
  for (std::size_t j = 0; j < rec.probs.size(); ++j) {
    const double o = j == g ? 1.0 : 0.0;
    const double e = rec.probs[j] - o;
    t.brier += e * e;
    if (j != g) weight_sum += std::abs(rec.cr[j] - cr_g);
  }
  const double pg = rec.probs[g] - 1.0;
  t.ground_truth = pg * pg;
  if (weight_sum < kDegenerateWeightSum) return t;
  for (std::size_t j = 0; j < rec.probs.size(); ++j) {
    if (j == g) continue;
    const double p2 = rec.probs[j] * rec.probs[j];
    const double dev = rec.cr[j] - cr_g;
    if (dev > 0.0) {
      t.conservatism += dev / weight_sum * p2;
    } else if (dev < 0.0) {
      t.non_defensive += -dev / weight_sum * p2;
    }
  }
  return t;
}

namespace {

struct Sums {
  double brier = 0.0;
  double ground_truth = 0.0;
  double conservatism = 0.0;
  double non_defensive = 0.0;
};

Sums parallel_sums(const EvaluationSet& eval) {
  const auto n = static_cast<long>(eval.records.size());
  std::vector<SampleTerms> terms(eval.records.size());
#pragma omp parallel for schedule(static)
  for (long k = 0; k < n; ++k) {
    terms[static_cast<std::size_t>(k)] = sample_terms(eval.records[static_cast<std::size_t>(k)]);
  }
  Sums s;
  for (const auto& t : terms) {
    s.brier += t.brier;
    s.ground_truth += t.ground_truth;
    s.conservatism += t.conservatism;
    s.non_defensive += t.non_defensive;
  }
  return s;
}

MetricReport to_report(const Sums& s, const EvaluationSet& eval) {
  const double n = static_cast<double>(eval.records.size());
  const double nm = n * static_cast<double>(eval.m);
  MetricReport r;
  r.B = s.brier / nm;
  r.G = s.ground_truth / nm;
  r.C = s.conservatism / n;
  r.D = s.non_defensive / n;
  r.B_c = r.D + r.G + r.C;
  return r;
}

}  // namespace

MetricReport fatality_aware(const EvaluationSet& eval) {
  eval.validate();
  return to_report(parallel_sums(eval), eval);
}

double brier(const EvaluationSet& eval) { return fatality_aware(eval).B; }
double ground_truth_term(const EvaluationSet& eval) { return fatality_aware(eval).G; }
double conservatism(const EvaluationSet& eval) { return fatality_aware(eval).C; }
double non_defensiveness(const EvaluationSet& eval) { return fatality_aware(eval).D; }

namespace serial {

double brier(const EvaluationSet& eval) {
  eval.validate();
  double acc = 0.0;
  for (const auto& r : eval.records) {
    for (std::size_t j = 0; j < eval.m; ++j) {
      const double o = static_cast<int>(j) + 1 == r.gt_pattern ? 1.0 : 0.0;
      acc += (r.probs[j] - o) * (r.probs[j] - o);
    }
  }
  return acc / (static_cast<double>(eval.n_samples()) * static_cast<double>(eval.m));
}

double ground_truth_term(const EvaluationSet& eval) {
  eval.validate();
  double acc = 0.0;
  for (const auto& r : eval.records) {
    const double e = r.probs[static_cast<std::size_t>(r.gt_pattern - 1)] - 1.0;
    acc += e * e;
  }
  return acc / (static_cast<double>(eval.n_samples()) * static_cast<double>(eval.m));
}

namespace {

// sign = +1 sums patterns more critical than the ground truth, -1 less critical.
double weighted_side(const EvaluationSet& eval, int sign) {
  eval.validate();
  double acc = 0.0;
  for (const auto& r : eval.records) {
    const double cr_g = r.cr[static_cast<std::size_t>(r.gt_pattern - 1)];
    double s = 0.0;
    for (std::size_t j = 0; j < eval.m; ++j) {
      if (static_cast<int>(j) + 1 != r.gt_pattern) s += std::abs(r.cr[j] - cr_g);
    }
    if (s < kDegenerateWeightSum) continue;
    for (std::size_t j = 0; j < eval.m; ++j) {
      const double dev = sign * (r.cr[j] - cr_g);
      if (dev > 0.0) acc += dev / s * r.probs[j] * r.probs[j];
    }
  }
  return acc / static_cast<double>(eval.n_samples());
}

}  // namespace

double conservatism(const EvaluationSet& eval) { return weighted_side(eval, +1); }
double non_defensiveness(const EvaluationSet& eval) { return weighted_side(eval, -1); }

MetricReport fatality_aware(const EvaluationSet& eval) {
  MetricReport r;
  r.B = serial::brier(eval);
  r.G = serial::ground_truth_term(eval);
  r.C = serial::conservatism(eval);
  r.D = serial::non_defensiveness(eval);
  r.B_c = r.D + r.G + r.C;
  return r;
}

}  // namespace serial

std::string csv_header() { return "method,B,G,C,D,B_c"; }

std::string csv_row(const std::string& method, const MetricReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%.6f", method.c_str(), r.B, r.G, r.C, r.D, r.B_c);
  return buf;
}

}  // namespace rxbench::metrics
