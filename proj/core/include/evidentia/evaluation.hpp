#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evidentia/config.hpp"
#include "evidentia/model.hpp"

namespace evidentia {

// Fraction of predictions with (y >= 0.5) == label; y exactly 0.5 counts
// as a positive prediction.
double accuracy_binary(const std::vector<double>& predictions, const std::vector<int>& labels);

// Question-level accuracy: credit iff the argmax-scored hypothesis of the
// four is the gold one; argmax ties break to the lowest index.
double accuracy_mc(const std::vector<QuestionGroup>& groups,
                   const std::vector<double>& predictions);

// Two-sided 95% Student-t quantile, df in [1, 63] (built-in table).
double t_quantile_975(int df);

struct RunStatistics {
  std::vector<double> accuracies;
  double mean = 0.0;
  double stddev = 0.0;      // Bessel-corrected
  double half_width = 0.0;  // t(0.975, n-1) * s / sqrt(n); infinite when n < 2
};
RunStatistics summarize_runs(std::vector<double> accuracies);

// Pearson product-moment r; nullopt when n < 2 or either side has zero
// variance (undefined, reported as such).
std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b);

// Dropout-off predictions for a whole split, with task-appropriate
// accuracy and per-class breakdown (mctest: one/multi/all).
struct EvalOutcome {
  std::vector<double> predictions;
  double accuracy = 0.0;
  std::map<std::string, double> by_class;
};
EvalOutcome evaluate_split(Model& model, const PreparedSplit& split);

// The 16-run protocol: n independent train+test cycles with run seeds
// derived from the master seed, aggregated into mean +- 95% half-width.
struct MultiRunResult {
  std::map<std::string, RunStatistics> by_class;  // always contains "all"
  std::vector<std::map<std::string, double>> per_run;
  std::vector<uint64_t> run_seeds;
  std::vector<std::string> warnings;  // aborted runs, statistics over the rest
};
MultiRunResult multi_run(const ExperimentConfig& cfg, int n, int jobs = 1);

// Per-evidence diagnostics: (C, R[, bm25]) rows plus the Pearson r between
// classification and relevance scores.
struct ScoreDiagnostics {
  std::vector<PairScore> pairs;
  std::optional<double> pearson_r;
};
ScoreDiagnostics collect_score_diagnostics(Model& model, const PreparedSplit& split);

std::string results_csv(const std::string& model_name, const std::string& dataset,
                        const std::string& split, const MultiRunResult& result);

}  // namespace evidentia
