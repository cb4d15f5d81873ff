// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mtlf/encoder.hpp"
#include "mtlf/task_kind.hpp"
#include "mtlf/text.hpp"

namespace mtlf {

struct TaskSpec {
  std::string name;
  TaskKind kind = TaskKind::single_classification;
  std::vector<std::string> labels;  // classification class names
  double range_lo = 0.0;            // regression range before normalization
  double range_hi = 1.0;
  LossKind loss = LossKind::cross_entropy;
  Domain domain = Domain::in_domain;

  std::size_t num_classes() const noexcept { return is_classification(kind) ? labels.size() : 0; }
  /// Classes for classification, 1 for regression.
  std::size_t output_width() const noexcept { return is_classification(kind) ? labels.size() : 1; }

  /// ContractError unless loss matches the kind (CE for classification,
  /// MSE for regression) and classification declares >= 2 labels.
  void validate() const;

  static TaskSpec from_manifest(const DatasetManifest& manifest);

  bool operator==(const TaskSpec&) const = default;
};

using LabelBatch = std::variant<std::vector<std::size_t>, std::vector<double>>;

struct Batch {
  TaskKind kind = TaskKind::single_classification;
  BatchInput input;
  LabelBatch labels;

  std::size_t size() const noexcept { return input.batch_size; }
};

/// Stacks examples into one batch, trimming trailing columns that are
/// padding in every row. Masked positions never influence unmasked outputs,
/// so trimming does not change results.
Batch make_batch(std::span<const EncodedExample> examples, TaskKind kind);
Batch make_batch(std::span<const EncodedExample> examples, std::span<const std::size_t> rows, TaskKind kind);

template <typename T>
struct TaskHead {
  Tensor<T> weight;  // [d, width]
  Tensor<T> bias;    // [width]
};

/// One shared encoder plus one dense head per registered task.
template <typename T>
class SharedModel {
 public:
  explicit SharedModel(EncoderConfig config);
  SharedModel(EncoderConfig config, EncoderParams<T> encoder);

  const EncoderConfig& config() const noexcept { return config_; }
  const EncoderParams<T>& encoder() const noexcept { return encoder_; }

  /// RegistryError on a duplicate name. Leaves the encoder untouched.
  void attach_head(const TaskSpec& spec, Rng& rng);
  /// Attaches a head with explicit parameters (checkpoint loading).
  void attach_head(const TaskSpec& spec, TaskHead<T> head);

  bool has_task(const std::string& name) const;
  const TaskSpec& task(const std::string& name) const;  // RegistryError
  const TaskHead<T>& head(const std::string& name) const;
  const std::vector<TaskSpec>& tasks() const noexcept { return specs_; }
  std::size_t head_count() const noexcept { return heads_.size(); }

  std::vector<NamedParameter<T>> encoder_parameters() const;
  std::vector<NamedParameter<T>> head_parameters(const std::string& name) const;
  /// Encoder parameters, then each head in registration order.
  std::vector<NamedParameter<T>> all_parameters() const;

  /// Deep copy; the dropout stream continues from the same state.
  SharedModel clone() const;

  Rng& dropout_rng() noexcept { return dropout_rng_; }
  void reseed_dropout(std::uint64_t seed) { dropout_rng_.seed(seed); }

 private:
  std::size_t index_of(const std::string& name) const;

  EncoderConfig config_;
  EncoderParams<T> encoder_;
  std::vector<TaskSpec> specs_;
  std::vector<TaskHead<T>> heads_;
  Rng dropout_rng_;
};

/// Pooled [CLS] representation [B, d] from the shared encoder.
template <typename T>
Tensor<T> encode_cls(SharedModel<T>& model, const BatchInput& input, bool training);

/// Logits [B, C] for classification tasks, scalars [B] for regression.
/// RegistryError for unknown tasks, ContractError when the batch kind
/// differs from the task kind.
template <typename T>
Tensor<T> forward_task(SharedModel<T>& model, const std::string& task, const Batch& batch, bool training);

/// Cross-entropy or MSE according to spec.loss.
template <typename T>
Tensor<T> task_loss(const TaskSpec& spec, const Tensor<T>& predictions, const LabelBatch& labels);

}  // namespace mtlf
