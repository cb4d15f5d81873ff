// SPDX-License-Identifier: Apache-2.0
#include "mtlf/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "json.hpp"

namespace mtlf {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 0.5))
    throw ConfigError("validation_fraction must lie in (0, 0.5)");
  if (!(min_delta >= 0.0)) throw ConfigError("min_delta must be non-negative");
  if (!(max_grad_norm >= 0.0)) throw ConfigError("max_grad_norm must be non-negative");
  adamw().validate();
}

AdamWConfig TrainConfig::adamw() const {
  return AdamWConfig{learning_rate, beta1, beta2, epsilon, weight_decay};
}

void TrainingLog::step(std::string_view phase, std::size_t epoch, std::size_t step, std::string_view task,
                       double loss) {
  if (!sink_) return;
  nlohmann::ordered_json rec;
  rec["phase"] = phase;
  rec["epoch"] = epoch;
  rec["step"] = step;
  rec["task"] = task;
  rec["loss"] = loss;
  *sink_ << rec.dump() << '\n';
}

void TrainingLog::epoch(std::size_t epoch, double validation_ce) {
  if (!sink_) return;
  nlohmann::ordered_json rec;
  rec["epoch"] = epoch;
  rec["validation_ce"] = validation_ce;
  *sink_ << rec.dump() << '\n';
}

float train_step(SharedModel<float>& model, AdamW<float>& optimizer, const std::string& task, const Batch& batch,
                 double max_grad_norm) {
  auto predictions = forward_task(model, task, batch, /*training=*/true);
  auto loss = task_loss(model.task(task), predictions, batch.labels);
  const float value = loss.item();
  optimizer.zero_grad();
  loss.backward();
  if (max_grad_norm > 0.0) ops::clip_grad_norm<float>(optimizer.parameters(), max_grad_norm);
  optimizer.step();
  return value;
}

MtlEngine::MtlEngine(SharedModel<float>& model, TrainConfig config) : model_(model), config_(config) {
  config_.validate();
}

void MtlEngine::register_task(const TaskSpec& spec, std::vector<EncodedExample> data) {
  spec.validate();
  for (const auto& t : tasks_)
    if (t.spec.name == spec.name) throw RegistryError("task '" + spec.name + "' is already registered");
  if (data.empty()) throw DataError("task '" + spec.name + "' has no training data");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& label = data[i].label;
    const bool ok = is_classification(spec.kind)
                        ? std::holds_alternative<std::size_t>(label) && std::get<std::size_t>(label) < spec.num_classes()
                        : std::holds_alternative<double>(label);
    if (!ok) throw ContractError("task '" + spec.name + "': example " + std::to_string(i) + " has an incompatible label");
  }
  Rng head_rng(derive_seed(config_.seed, "head", spec.name));
  model_.attach_head(spec, head_rng);
  tasks_.push_back({spec, std::move(data)});
}

EpochSchedule MtlEngine::build_epoch_schedule(std::size_t epoch_index) const {
  Rng rng(derive_seed(config_.seed, "schedule", epoch_index));
  EpochSchedule schedule;
  for (std::size_t t = 0; t < tasks_.size(); ++t) {
    std::vector<std::size_t> order(tasks_[t].data.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
      const std::size_t end = std::min(order.size(), start + config_.batch_size);
      schedule.batches.push_back({t, std::vector<std::size_t>(order.begin() + start, order.begin() + end)});
    }
  }
  std::shuffle(schedule.batches.begin(), schedule.batches.end(), rng);
  return schedule;
}

MtlPhaseResult MtlEngine::run_mtl_phase(TrainingLog* log) {
  MtlPhaseResult result;
  if (config_.mtl_epochs == 0) return result;
  if (tasks_.empty()) throw DataError("MTL phase requires at least one auxiliary task");
  auto params = model_.encoder_parameters();
  for (const auto& t : tasks_) {
    auto h = model_.head_parameters(t.spec.name);
    params.insert(params.end(), h.begin(), h.end());
  }
  AdamW<float> optimizer(std::move(params), config_.adamw());
  for (const auto& t : tasks_) result.task_losses[t.spec.name];

  for (std::size_t epoch = 0; epoch < config_.mtl_epochs; ++epoch) {
    const auto schedule = build_epoch_schedule(epoch);
    for (const auto& scheduled : schedule.batches) {
      const auto& task = tasks_[scheduled.task];
      const Batch batch = make_batch(task.data, scheduled.rows, task.spec.kind);
      float loss;
      try {
        loss = train_step(model_, optimizer, task.spec.name, batch, config_.max_grad_norm);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " during MTL epoch " + std::to_string(epoch) + " on task '" +
                           task.spec.name + "'; last stable step " + std::to_string(result.steps));
      }
      ++result.steps;
      result.task_losses[task.spec.name].push_back(loss);
      if (log) log->step("mtl", epoch, result.steps, task.spec.name, loss);
    }
  }
  return result;
}

EarlyStopState early_stop_check(EarlyStopState state, double new_loss, std::size_t patience, double min_delta) {
  if (!std::isfinite(new_loss)) {
    throw NumericError("validation loss is not finite after epoch " + std::to_string(state.epochs_seen + 1));
  }
  ++state.epochs_seen;
  if (new_loss < state.best_loss - min_delta) {
    state.best_loss = new_loss;
    state.best_epoch = state.epochs_seen;
    state.epochs_without_improvement = 0;
  } else {
    ++state.epochs_without_improvement;
    if (state.epochs_without_improvement >= patience) state.stopped = true;
  }
  return state;
}

double evaluation_loss(SharedModel<float>& model, const std::string& task, std::span<const EncodedExample> examples,
                       std::size_t batch_size) {
  if (examples.empty()) throw DataError("cannot evaluate on an empty set");
  const auto& spec = model.task(task);
  NoGradGuard no_grad;
  double total = 0.0;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const auto chunk = examples.subspan(start, std::min(batch_size, examples.size() - start));
    const Batch batch = make_batch(chunk, spec.kind);
    const auto loss = task_loss(spec, forward_task(model, task, batch, /*training=*/false), batch.labels);
    total += static_cast<double>(loss.item()) * static_cast<double>(chunk.size());
  }
  return total / static_cast<double>(examples.size());
}

TrainValidationSplit stratified_split(std::span<const EncodedExample> examples, std::size_t num_classes,
                                      double validation_fraction, Rng& rng) {
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto* c = std::get_if<std::size_t>(&examples[i].label);
    if (!c || *c >= num_classes) throw ContractError("stratified split requires class labels");
    by_class[*c].push_back(i);
  }
  const auto n = static_cast<double>(examples.size());
  const auto total = static_cast<std::size_t>(std::llround(validation_fraction * n));
  std::vector<std::size_t> quota(num_classes);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double exact = validation_fraction * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i) {
    const std::size_t c = remainders[i].second;
    if (quota[c] < by_class[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }
  TrainValidationSplit split;
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& idx = by_class[c];
    std::shuffle(idx.begin(), idx.end(), rng);
    split.validation.insert(split.validation.end(), idx.begin(), idx.begin() + quota[c]);
    split.train.insert(split.train.end(), idx.begin() + quota[c], idx.end());
  }
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

FinetuneResult run_target_finetune(SharedModel<float>& model, const TaskSpec& target,
                                   std::span<const EncodedExample> train_data, const TrainConfig& config,
                                   const FinetuneOptions& options) {
  config.validate();
  if (!(target.kind == TaskKind::single_classification && target.num_classes() == 2))
    throw ContractError("target task '" + target.name + "' must be binary single-sentence classification");
  if (!model.has_task(target.name)) {
    Rng head_rng(derive_seed(config.seed, "target-head"));
    model.attach_head(target, head_rng);
  }

  Rng split_rng(derive_seed(config.seed, "validation-split"));
  const auto split = stratified_split(train_data, target.num_classes(), config.validation_fraction, split_rng);
  if (split.train.size() < config.batch_size) {
    throw DataError("target training portion has " + std::to_string(split.train.size()) +
                    " examples, fewer than one batch of " + std::to_string(config.batch_size));
  }
  if (split.validation.empty()) throw DataError("validation split is empty");
  std::vector<EncodedExample> validation;
  validation.reserve(split.validation.size());
  for (auto i : split.validation) validation.push_back(train_data[i]);

  auto params = model.encoder_parameters();
  for (auto& p : model.head_parameters(target.name)) params.push_back(p);
  AdamW<float> optimizer(params, config.adamw());

  FinetuneResult result;
  result.train_size = split.train.size();
  result.validation_size = validation.size();
  std::vector<std::vector<float>> best_snapshot;
  EarlyStopState state;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::vector<std::size_t> order = split.train;
    Rng epoch_rng(derive_seed(config.seed, "target-epoch", epoch));
    std::shuffle(order.begin(), order.end(), epoch_rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const Batch batch = make_batch(train_data, rows, target.kind);
      float loss;
      try {
        loss = train_step(model, optimizer, target.name, batch, config.max_grad_norm);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " during target epoch " + std::to_string(epoch) +
                           "; last stable step " + std::to_string(step));
      }
      ++step;
      result.train_losses.push_back(loss);
      if (options.log) options.log->step("target", epoch, step, target.name, loss);
    }
    const double val = options.validation_override ? options.validation_override(model, epoch)
                                                   : evaluation_loss(model, target.name, validation, config.batch_size);
    result.validation_trace.push_back(val);
    if (options.log) options.log->epoch(epoch, val);
    if (options.on_epoch_end) options.on_epoch_end(model, epoch);
    result.epochs_run = epoch;
    state = early_stop_check(state, val, config.patience, config.min_delta);
    if (state.best_epoch == epoch) {
      best_snapshot.clear();
      for (const auto& p : params) best_snapshot.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    }
    if (state.stopped) break;
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_data();
    std::copy(best_snapshot[i].begin(), best_snapshot[i].end(), dst.begin());
  }
  result.best_epoch = state.best_epoch;
  result.best_validation_loss = state.best_loss;
  return result;
}

}  // namespace mtlf
