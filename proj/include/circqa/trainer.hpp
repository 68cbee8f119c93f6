#pragma once

// Adam training with per-epoch logs and checkpoints, post-hoc model
// selection, curricula and k-fold cross-validation.

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "circqa/dataset.hpp"
#include "circqa/metrics.hpp"
#include "circqa/model.hpp"

namespace circqa {

enum class CurriculumMode : std::uint8_t { Smooth, Step };

struct CurriculumConfig {
  bool enabled = false;
  int epochs = 30;
  CurriculumMode mode = CurriculumMode::Smooth;
};

struct RunConfig {
  nlohmann::json model;
  double learning_rate = 0.0005;
  int batch_size = 1;
  int max_epochs = 30;
  Scheme scheme = Scheme::V;
  CurriculumConfig curriculum;
  std::uint64_t seed = 0;
  bool deterministic = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  static RunConfig quantum_defaults();
  static RunConfig neural_defaults();

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  std::size_t updates = 0;
  std::size_t examples = 0;
  /// Accuracy on each non-empty validation subset (V, A, B, C).
  std::map<Scheme, double> validation;
  /// Present on epochs 1, 4, 7, ...
  std::optional<double> train_accuracy;
  std::string checkpoint;

  nlohmann::json to_json() const;
  static EpochLog from_json(const nlohmann::json& j);
};

/// Header and row of the per-epoch metrics table.
std::string epoch_csv_header();
std::string epoch_csv_row(const EpochLog& log);
std::vector<EpochLog> parse_epoch_csv(const std::string& text);

/// Validation score of one epoch under a scheme: the subset accuracy for
/// V/A/B/C, c_score(A, B) for AB and c_score(V, C) for All. nullopt when the
/// needed accuracies were not logged.
std::optional<double> scheme_score(const EpochLog& log, Scheme scheme);

/// Index of the selected epoch: best score, then logged train accuracy
/// closest to that score (unlogged counts as infinitely far), then lower
/// loss, then the earliest epoch.
std::size_t select_model(const std::vector<EpochLog>& logs, Scheme scheme);

/// Indices (into train) used at 0-based epoch `epoch`. Strata are introduced
/// in increasing order at boundaries round(j * epochs / m); smooth mode ramps
/// each new stratum in over its interval along a fixed seeded order.
std::vector<std::size_t> curriculum_schedule(const std::vector<LabeledExample>& train, const CurriculumConfig& cfg,
                                             int epoch, std::uint64_t seed);

struct TrainResult {
  std::vector<EpochLog> logs;
  /// Parameter vector after each epoch, aligned with logs.
  std::vector<std::vector<double>> checkpoints;
  ParameterStore store;
};

using EpochCallback = std::function<void(EpochLog&, const ParameterStore&)>;

/// Throws NonFiniteLoss. `on_epoch` may fill in the checkpoint reference.
TrainResult train(const RunConfig& run, const DatasetBundle& data, const EpochCallback& on_epoch = {});
TrainResult train(const RunConfig& run, const DatasetBundle& data, const SemanticModel& model,
                  const EpochCallback& on_epoch = {});

struct FoldReport {
  int fold = 0;
  int selected_epoch = 0;
  double acc_train = 0.0;
  double acc_test = 0.0;
  double c_score = 0.0;
  std::optional<double> acc_twin;
};

struct CrossValidation {
  std::vector<FoldReport> folds;
  double mean_train = 0.0;
  double mean_test = 0.0;
  double mean_c_score = 0.0;
  /// 95% Student-t interval for the mean test accuracy.
  Interval test_interval;
};

/// Train and validation-V data pooled, each stratum split into k folds.
std::vector<std::vector<std::size_t>> stratified_folds(const std::vector<LabeledExample>& pool, int k,
                                                       std::uint64_t seed);

CrossValidation cross_validate(const RunConfig& run, const DatasetBundle& data, int k = 5);

}  // namespace circqa
