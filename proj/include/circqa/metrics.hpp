#pragma once

// Accuracies, generalisation gap (c_fact), gap-penalised accuracy (c_score),
// epsilon-compositionality, exact binomial intervals and the reports built
// on them. Everything is computed from prediction maps (id -> answer) so a
// report can be replayed from saved prediction files.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "circqa/dataset.hpp"
#include "circqa/model.hpp"

namespace circqa {

/// max(0, a - b). Throws OutOfRange outside [0,1].
double c_fact(double acc_a, double acc_b);
/// (1 - 2 c_fact) a. Throws OutOfRange outside [0,1].
double c_score(double acc_a, double acc_b);
bool epsilon_compositional(double acc_a, double acc_b, double epsilon);

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Exact two-sided Clopper-Pearson interval for k successes in n trials.
Interval clopper_pearson(std::size_t k, std::size_t n, double confidence = 0.95);

using Predictions = std::map<std::string, Answer>;

Predictions predict_all(const SemanticModel& model, const ParameterStore& store,
                        const std::vector<CompiledExample>& examples);

enum class Labels : std::uint8_t { Dataset, Truth };

struct Tally {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const noexcept { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

/// Throws Format when an example has no prediction.
Tally tally(const std::vector<LabeledExample>& xs, const Predictions& preds, Labels labels = Labels::Dataset);
double accuracy(const std::vector<LabeledExample>& xs, const Predictions& preds, Labels labels = Labels::Dataset);

struct StratumAccuracy {
  int stratum = 0;
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  Interval interval;
};

std::vector<StratumAccuracy> per_stratum_accuracy(const std::vector<LabeledExample>& xs, const Predictions& preds);

/// c_score(acc on valid_a, acc on valid_b). Throws EmptyHalf.
double scheme_score_estimate(const std::vector<LabeledExample>& valid_a, const std::vector<LabeledExample>& valid_b,
                             const Predictions& preds);

struct OvergeneralisationReport {
  double acc_corrupted = 0.0;
  double acc_clean = 0.0;
  double c_fact = 0.0;
  std::size_t n_corrupted = 0;
  std::size_t n_clean = 0;
  bool overgeneralises = false;
};

/// Both accuracies against the true labels. Throws NoCorruptedExamples.
OvergeneralisationReport overgeneralisation_report(const std::vector<LabeledExample>& train, const Predictions& preds);

struct CompositionReport {
  std::string task;
  double baseline = 0.5;
  double acc_train = 0.0;
  double acc_test = 0.0;
  std::optional<double> acc_twin;
  std::vector<StratumAccuracy> train_strata;
  std::vector<StratumAccuracy> test_strata;
  double c_fact = 0.0;
  double c_score = 0.0;
  std::map<double, bool> epsilon;
  std::optional<double> score_ab;
  std::optional<double> score_all;
  std::optional<OvergeneralisationReport> overgeneralisation;

  nlohmann::json to_json() const;
  std::string to_text() const;
  /// split,stratum,n,correct,accuracy,ci_lo,ci_hi
  std::string strata_csv() const;
};

CompositionReport composition_report(const DatasetBundle& bundle, const Predictions& preds,
                                     const std::vector<double>& epsilons = {0.05, 0.1, 0.2});

}  // namespace circqa
