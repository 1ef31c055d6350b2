#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "frn/activation.hpp"
#include "frn/dataset.hpp"
#include "frn/norm.hpp"

namespace frn {

/// Where training data comes from. An empty images path selects the
/// built-in synthetic task; otherwise an IDX image/label pair is loaded and
/// its last eighth is held out for evaluation.
struct DatasetSpec {
  std::string images_path;
  std::string labels_path;

  bool synthetic() const { return images_path.empty(); }
};

/// Parses "synthetic" or "idx:IMAGES:LABELS". Throws ConfigError.
DatasetSpec parse_dataset_spec(const std::string& text);
std::string describe(const DatasetSpec& spec);

struct TrainConfig {
  NormSpec norm;
  ActKind act = ActKind::TLU;
  std::size_t batch_size = 32;
  std::size_t total_steps = 2000;
  /// Unset → linear scaling rule 0.1·batch/256.
  std::optional<double> base_lr;
  /// Unset → 5% of total_steps.
  std::optional<std::size_t> warmup_steps;
  double momentum = 0.9;
  double weight_decay = 4e-4;
  /// Also apply weight decay to γ, β, τ, κ, ε_l and the dense bias.
  bool decay_all_params = false;
  std::uint64_t seed = 0;
  DatasetSpec dataset;
  /// Evaluate every this many steps (and at the last step). 0 → total_steps/10.
  std::size_t eval_every = 0;
  /// After training, also measure accuracy on the whole training set.
  bool measure_train_accuracy = false;
};

/// Throws ConfigError for inconsistent configurations.
void validate(const TrainConfig& config);
double resolved_lr(const TrainConfig& config);
std::size_t resolved_warmup(const TrainConfig& config);
std::size_t resolved_eval_every(const TrainConfig& config);

/// Loss at or above this (or non-finite) aborts the run as diverged.
inline constexpr double kDivergenceLoss = 1e4;

struct MetricsRow {
  std::size_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> eval_accuracy;
};

struct TrainResult {
  std::vector<MetricsRow> rows;
  bool diverged = false;
  std::string abort_reason;
  /// Last evaluated accuracy on the held-out set (absent if never evaluated).
  std::optional<double> final_eval_accuracy;
  /// Whole-training-set accuracy of the final weights in eval mode, when requested.
  std::optional<double> final_train_accuracy;
};

/// Deterministic in config.seed. Divergence truncates the metrics and sets
/// `diverged` rather than throwing.
TrainResult train(const TrainConfig& config);
/// As above, on a dataset the caller already holds.
TrainResult train(const TrainConfig& config, const DatasetSplit& data);

/// Loads or synthesizes the dataset named by the config.
DatasetSplit load_dataset(const TrainConfig& config);

inline constexpr const char* kMetricsHeader = "step,lr,train_loss,train_acc,eval_acc";

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows);

}  // namespace frn
