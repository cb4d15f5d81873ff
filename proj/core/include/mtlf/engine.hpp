// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtlf/adamw.hpp"
#include "mtlf/model.hpp"

namespace mtlf {

struct TrainConfig {
  std::size_t batch_size = 32;
  double learning_rate = 5e-5;
  std::size_t max_epochs = 4;
  std::size_t patience = 1;
  double min_delta = 0.0;
  double validation_fraction = 0.1;
  std::size_t mtl_epochs = 1;
  std::uint64_t seed = 0;

  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
  double max_grad_norm = 0.0;  // 0 disables clipping

  void validate() const;  // ConfigError
  AdamWConfig adamw() const;
};

/// JSON-lines sink: {phase, epoch, step, task, loss} per step and
/// {epoch, validation_ce} per target epoch. A null stream discards records.
class TrainingLog {
 public:
  explicit TrainingLog(std::ostream* sink = nullptr) : sink_(sink) {}

  void step(std::string_view phase, std::size_t epoch, std::size_t step, std::string_view task, double loss);
  void epoch(std::size_t epoch, double validation_ce);

 private:
  std::ostream* sink_;
};

struct ScheduledBatch {
  std::size_t task = 0;           // index into MtlEngine::tasks()
  std::vector<std::size_t> rows;  // example indices within that task
};

struct EpochSchedule {
  std::vector<ScheduledBatch> batches;
};

struct RegisteredTask {
  TaskSpec spec;
  std::vector<EncodedExample> data;
};

struct MtlPhaseResult {
  // Per-step batch losses, in schedule order, keyed by task name.
  std::map<std::string, std::vector<float>> task_losses;
  std::size_t steps = 0;
};

/// Forward, loss, zero grads, backward, AdamW step. Returns the batch loss
/// computed before the update.
float train_step(SharedModel<float>& model, AdamW<float>& optimizer, const std::string& task, const Batch& batch,
                 double max_grad_norm = 0.0);

/// Auxiliary-task trainer over one shared model. Every epoch, each task's
/// data is reshuffled and cut into batches of batch_size (the last one may
/// be partial); the batches of all tasks are then merged and shuffled.
class MtlEngine {
 public:
  MtlEngine(SharedModel<float>& model, TrainConfig config);

  /// Attaches a head for the task. RegistryError on duplicate names,
  /// DataError on empty data, ContractError on label/kind mismatch.
  void register_task(const TaskSpec& spec, std::vector<EncodedExample> data);

  const std::vector<RegisteredTask>& tasks() const noexcept { return tasks_; }

  /// Deterministic per (config.seed, epoch_index).
  EpochSchedule build_epoch_schedule(std::size_t epoch_index) const;

  /// Runs config.mtl_epochs epochs over all registered tasks.
  MtlPhaseResult run_mtl_phase(TrainingLog* log = nullptr);

 private:
  SharedModel<float>& model_;
  TrainConfig config_;
  std::vector<RegisteredTask> tasks_;
};

struct EarlyStopState {
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;  // 1-based; 0 before any observation
  std::size_t epochs_seen = 0;
  std::size_t epochs_without_improvement = 0;
  bool stopped = false;
};

/// An epoch improves iff new_loss < best_loss - min_delta. Training stops
/// once `patience` consecutive epochs fail to improve. NumericError on NaN.
EarlyStopState early_stop_check(EarlyStopState state, double new_loss, std::size_t patience, double min_delta);

/// Mean cross-entropy (or MSE for regression tasks) over `examples` in eval
/// mode without recording a graph.
double evaluation_loss(SharedModel<float>& model, const std::string& task, std::span<const EncodedExample> examples,
                       std::size_t batch_size = 32);

/// Seeded validation split stratified by class. The validation size is
/// round(fraction * n), allotted to classes by largest remainder.
struct TrainValidationSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};
TrainValidationSplit stratified_split(std::span<const EncodedExample> examples, std::size_t num_classes,
                                      double validation_fraction, Rng& rng);

struct FinetuneOptions {
  TrainingLog* log = nullptr;
  /// Replaces the validation-CE measurement after each (1-based) epoch.
  std::function<double(SharedModel<float>&, std::size_t)> validation_override;
  /// Observes the model after each epoch, before early stopping is applied.
  std::function<void(const SharedModel<float>&, std::size_t)> on_epoch_end;
};

struct FinetuneResult {
  std::size_t best_epoch = 0;
  double best_validation_loss = std::numeric_limits<double>::infinity();
  std::vector<double> validation_trace;
  std::vector<float> train_losses;
  std::size_t epochs_run = 0;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
};

/// Trains the binary target task with early stopping on validation CE and
/// restores the parameters of the best epoch. A target head is attached if
/// the model does not have one yet.
FinetuneResult run_target_finetune(SharedModel<float>& model, const TaskSpec& target,
                                   std::span<const EncodedExample> train_data, const TrainConfig& config,
                                   const FinetuneOptions& options = {});

}  // namespace mtlf
