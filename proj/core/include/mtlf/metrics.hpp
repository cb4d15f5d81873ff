// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtlf/model.hpp"

namespace mtlf {

/// One-vs-rest 2x2 table per class.
struct ConfusionCounts {
  std::size_t num_classes = 0;
  std::uint64_t n = 0;
  std::vector<std::uint64_t> tp, fp, fn, tn;
};

/// ContractError on length mismatch or an entry >= num_classes.
ConfusionCounts confusion_matrix(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                                 std::size_t num_classes);

struct PrecisionRecallF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Zero denominators yield 0.
PrecisionRecallF1 binary_prf(const ConfusionCounts& counts, std::size_t positive_class);

struct AggregateF1 {
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
};

AggregateF1 aggregate_f1(const ConfusionCounts& counts);

struct MetricsReport {
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  double binary_f1 = 0.0;
  double precision = 0.0;  // positive class
  double recall = 0.0;     // positive class
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double ce_loss = 0.0;
  std::uint64_t n = 0;
  std::vector<MetricsReport> folds;  // empty unless this is an aggregate
};

/// All classification fields; ce_loss is left at 0.
MetricsReport classification_report(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                                     std::size_t num_classes, std::size_t positive_class = 1);

/// Row-wise argmax over [rows, num_classes] logits; ties go to the lowest index.
std::vector<std::size_t> argmax_rows(std::span<const float> logits, std::size_t num_classes);

/// Mean over rows of -log softmax(logits)[label], computed in double.
double mean_cross_entropy(std::span<const float> logits, std::span<const std::size_t> labels,
                          std::size_t num_classes);

struct PredictionDump {
  std::size_t num_classes = 0;
  std::vector<float> logits;  // [n, num_classes]
  std::vector<std::size_t> predictions;
  std::vector<std::size_t> labels;
};

/// Eval-mode forward passes over test_data. DataError when empty.
PredictionDump predict(SharedModel<float>& model, const std::string& target_task,
                       std::span<const EncodedExample> test_data, std::size_t batch_size = 32);

MetricsReport report_from_dump(const PredictionDump& dump, std::size_t positive_class = 1);

MetricsReport evaluate_model(SharedModel<float>& model, const std::string& target_task,
                             std::span<const EncodedExample> test_data, std::size_t batch_size = 32);

/// Unweighted mean of every field. n is the total; the inputs are kept as folds.
MetricsReport mean_report(std::span<const MetricsReport> fold_reports);

nlohmann::ordered_json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::ordered_json& j);  // FormatError

}  // namespace mtlf
