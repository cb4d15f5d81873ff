// SPDX-License-Identifier: Apache-2.0
#include "mtlf/model.hpp"

#include <algorithm>
#include <cmath>

namespace mtlf {

void TaskSpec::validate() const {
  if (name.empty()) throw ContractError("task spec requires a name");
  if (loss != loss_for(kind)) {
    throw ContractError("task '" + name + "': " + std::string(to_string(kind)) + " requires " +
                        std::string(to_string(loss_for(kind))) + " loss");
  }
  if (is_classification(kind) && labels.size() < 2)
    throw ContractError("classification task '" + name + "' needs at least 2 labels");
  if (!is_classification(kind) && !(range_lo < range_hi))
    throw ContractError("regression task '" + name + "' needs range lo < hi");
}

TaskSpec TaskSpec::from_manifest(const DatasetManifest& m) {
  TaskSpec spec;
  spec.name = m.name;
  spec.kind = m.task_kind;
  spec.labels = m.labels;
  spec.range_lo = m.range_lo;
  spec.range_hi = m.range_hi;
  spec.loss = loss_for(m.task_kind);
  spec.domain = m.domain;
  spec.validate();
  return spec;
}

Batch make_batch(std::span<const EncodedExample> examples, std::span<const std::size_t> rows, TaskKind kind) {
  if (rows.empty()) throw DataError("cannot build an empty batch");
  const std::size_t full = examples[rows[0]].token_ids.size();
  std::size_t used = 1;
  for (auto r : rows) {
    const auto& ex = examples[r];
    if (ex.token_ids.size() != full || ex.attention_mask.size() != full)
      throw DimensionError("examples in one batch must share a padded length");
    for (std::size_t t = full; t > used; --t) {
      if (ex.attention_mask[t - 1]) {
        used = t;
        break;
      }
    }
  }
  Batch batch;
  batch.kind = kind;
  batch.input.batch_size = rows.size();
  batch.input.seq_len = used;
  batch.input.token_ids.reserve(rows.size() * used);
  batch.input.mask.reserve(rows.size() * used);
  std::vector<std::size_t> classes;
  std::vector<double> targets;
  for (auto r : rows) {
    const auto& ex = examples[r];
    batch.input.token_ids.insert(batch.input.token_ids.end(), ex.token_ids.begin(), ex.token_ids.begin() + used);
    batch.input.mask.insert(batch.input.mask.end(), ex.attention_mask.begin(), ex.attention_mask.begin() + used);
    if (is_classification(kind)) {
      if (!std::holds_alternative<std::size_t>(ex.label))
        throw ContractError("classification batch given a regression label");
      classes.push_back(std::get<std::size_t>(ex.label));
    } else {
      if (!std::holds_alternative<double>(ex.label))
        throw ContractError("regression batch given a class label");
      targets.push_back(std::get<double>(ex.label));
    }
  }
  if (is_classification(kind)) batch.labels = std::move(classes);
  else batch.labels = std::move(targets);
  return batch;
}

Batch make_batch(std::span<const EncodedExample> examples, TaskKind kind) {
  std::vector<std::size_t> rows(examples.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return make_batch(examples, rows, kind);
}

template <typename T>
SharedModel<T>::SharedModel(EncoderConfig config)
    : SharedModel(config, init_encoder<T>(config)) {}

template <typename T>
SharedModel<T>::SharedModel(EncoderConfig config, EncoderParams<T> encoder)
    : config_(config), encoder_(std::move(encoder)), dropout_rng_(derive_seed(config.seed, "dropout")) {
  config_.validate();
  if (encoder_.layers.size() != config_.num_layers)
    throw ConfigError("encoder parameters do not match num_layers");
}

template <typename T>
std::size_t SharedModel<T>::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < specs_.size(); ++i)
    if (specs_[i].name == name) return i;
  std::string known;
  for (const auto& s : specs_) known += (known.empty() ? "" : ", ") + s.name;
  throw RegistryError("unknown task '" + name + "' (registered: " + (known.empty() ? "none" : known) + ")");
}

template <typename T>
void SharedModel<T>::attach_head(const TaskSpec& spec, Rng& rng) {
  spec.validate();
  if (has_task(spec.name)) throw RegistryError("task '" + spec.name + "' already has a head");
  const std::size_t d = config_.hidden_dim, width = spec.output_width();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<T> w(d * width);
  for (auto& v : w) {
    double z;
    do z = normal(rng);
    while (std::abs(z) > 2.0);
    v = static_cast<T>(0.02 * z);
  }
  attach_head(spec, TaskHead<T>{Tensor<T>({d, width}, std::move(w), true), Tensor<T>::zeros({width}, true)});
}

template <typename T>
void SharedModel<T>::attach_head(const TaskSpec& spec, TaskHead<T> head) {
  spec.validate();
  if (has_task(spec.name)) throw RegistryError("task '" + spec.name + "' already has a head");
  const Shape want_w{config_.hidden_dim, spec.output_width()};
  const Shape want_b{spec.output_width()};
  if (head.weight.shape() != want_w || head.bias.shape() != want_b)
    throw DimensionError("head for '" + spec.name + "' must be " + shape_string(want_w) + " + " + shape_string(want_b));
  specs_.push_back(spec);
  heads_.push_back(std::move(head));
}

template <typename T>
bool SharedModel<T>::has_task(const std::string& name) const {
  return std::any_of(specs_.begin(), specs_.end(), [&](const TaskSpec& s) { return s.name == name; });
}

template <typename T>
const TaskSpec& SharedModel<T>::task(const std::string& name) const {
  return specs_[index_of(name)];
}

template <typename T>
const TaskHead<T>& SharedModel<T>::head(const std::string& name) const {
  return heads_[index_of(name)];
}

template <typename T>
std::vector<NamedParameter<T>> SharedModel<T>::encoder_parameters() const {
  return encoder_.named_parameters();
}

template <typename T>
std::vector<NamedParameter<T>> SharedModel<T>::head_parameters(const std::string& name) const {
  const auto& h = head(name);
  return {{"heads." + name + ".weight", h.weight}, {"heads." + name + ".bias", h.bias}};
}

template <typename T>
std::vector<NamedParameter<T>> SharedModel<T>::all_parameters() const {
  auto out = encoder_parameters();
  for (const auto& spec : specs_) {
    auto h = head_parameters(spec.name);
    out.insert(out.end(), h.begin(), h.end());
  }
  return out;
}

template <typename T>
SharedModel<T> SharedModel<T>::clone() const {
  SharedModel copy(config_, encoder_.clone());
  for (std::size_t i = 0; i < specs_.size(); ++i)
    copy.attach_head(specs_[i], TaskHead<T>{heads_[i].weight.clone(), heads_[i].bias.clone()});
  copy.dropout_rng_ = dropout_rng_;
  return copy;
}

template <typename T>
Tensor<T> encode_cls(SharedModel<T>& model, const BatchInput& input, bool training) {
  return pool_cls(encode_sequence(model.encoder(), model.config(), input, training, model.dropout_rng()));
}

template <typename T>
Tensor<T> forward_task(SharedModel<T>& model, const std::string& task, const Batch& batch, bool training) {
  const auto& spec = model.task(task);
  if (spec.kind != batch.kind) {
    throw ContractError("task '" + task + "' is " + std::string(to_string(spec.kind)) + " but batch is " +
                        std::string(to_string(batch.kind)));
  }
  const auto& head = model.head(task);
  auto pooled = encode_cls(model, batch.input, training);
  pooled = ops::dropout(pooled, model.config().dropout_p, training, model.dropout_rng());
  auto out = ops::linear(pooled, head.weight, head.bias);
  if (is_classification(spec.kind)) return out;
  return ops::reshape(out, {batch.size()});
}

template <typename T>
Tensor<T> task_loss(const TaskSpec& spec, const Tensor<T>& predictions, const LabelBatch& labels) {
  if (spec.loss == LossKind::cross_entropy) {
    const auto* classes = std::get_if<std::vector<std::size_t>>(&labels);
    if (!classes) throw ContractError("task '" + spec.name + "' uses CE loss but received float targets");
    if (predictions.rank() != 2 || predictions.dim(1) != spec.num_classes() || predictions.dim(0) != classes->size())
      throw ContractError("task '" + spec.name + "': logits " + shape_string(predictions.shape()) +
                          " do not match " + std::to_string(classes->size()) + " labels x " +
                          std::to_string(spec.num_classes()) + " classes");
    return ops::cross_entropy_loss(predictions, *classes);
  }
  const auto* targets = std::get_if<std::vector<double>>(&labels);
  if (!targets) throw ContractError("task '" + spec.name + "' uses MSE loss but received class labels");
  if (predictions.rank() != 1 || predictions.dim(0) != targets->size())
    throw ContractError("task '" + spec.name + "': predictions " + shape_string(predictions.shape()) +
                        " do not match " + std::to_string(targets->size()) + " targets");
  std::vector<T> t(targets->begin(), targets->end());
  const Shape shape{t.size()};
  return ops::mse_loss(predictions, Tensor<T>(shape, std::move(t)));
}

#define MTLF_INSTANTIATE_MODEL(T)                                                           \
  template class SharedModel<T>;                                                            \
  template Tensor<T> encode_cls(SharedModel<T>&, const BatchInput&, bool);                  \
  template Tensor<T> forward_task(SharedModel<T>&, const std::string&, const Batch&, bool); \
  template Tensor<T> task_loss(const TaskSpec&, const Tensor<T>&, const LabelBatch&);

MTLF_INSTANTIATE_MODEL(float)
MTLF_INSTANTIATE_MODEL(double)

#undef MTLF_INSTANTIATE_MODEL

}  // namespace mtlf
