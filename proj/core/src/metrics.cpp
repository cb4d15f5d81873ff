// SPDX-License-Identifier: Apache-2.0
#include "mtlf/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace mtlf {

ConfusionCounts confusion_matrix(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                                 std::size_t num_classes) {
  if (predictions.size() != labels.size()) {
    throw ContractError("confusion_matrix: " + std::to_string(predictions.size()) + " predictions vs " +
                        std::to_string(labels.size()) + " labels");
  }
  if (num_classes < 2) throw ContractError("confusion_matrix needs at least 2 classes");
  ConfusionCounts c;
  c.num_classes = num_classes;
  c.n = labels.size();
  c.tp.assign(num_classes, 0);
  c.fp.assign(num_classes, 0);
  c.fn.assign(num_classes, 0);
  c.tn.assign(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto p = predictions[i], y = labels[i];
    if (p >= num_classes || y >= num_classes)
      throw ContractError("confusion_matrix: entry " + std::to_string(i) + " is outside the class range");
    if (p == y) {
      ++c.tp[y];
    } else {
      ++c.fp[p];
      ++c.fn[y];
    }
  }
  for (std::size_t k = 0; k < num_classes; ++k) c.tn[k] = c.n - c.tp[k] - c.fp[k] - c.fn[k];
  return c;
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// 2TP / (2TP + FP + FN); the harmonic mean of precision and recall without
// the intermediate rounding.
double f1_from(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) { return ratio(2 * tp, 2 * tp + fp + fn); }

}  // namespace

PrecisionRecallF1 binary_prf(const ConfusionCounts& counts, std::size_t positive_class) {
  if (positive_class >= counts.num_classes)
    throw ContractError("positive class " + std::to_string(positive_class) + " is out of range");
  const auto tp = counts.tp[positive_class], fp = counts.fp[positive_class], fn = counts.fn[positive_class];
  return {ratio(tp, tp + fp), ratio(tp, tp + fn), f1_from(tp, fp, fn)};
}

AggregateF1 aggregate_f1(const ConfusionCounts& counts) {
  if (counts.num_classes < 2) throw ContractError("aggregate_f1 needs at least 2 classes");
  AggregateF1 out;
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t k = 0; k < counts.num_classes; ++k) {
    out.macro_f1 += f1_from(counts.tp[k], counts.fp[k], counts.fn[k]);
    tp += counts.tp[k];
    fp += counts.fp[k];
    fn += counts.fn[k];
  }
  out.macro_f1 /= static_cast<double>(counts.num_classes);
  out.micro_f1 = f1_from(tp, fp, fn);
  return out;
}

MetricsReport classification_report(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                                     std::size_t num_classes, std::size_t positive_class) {
  const auto counts = confusion_matrix(predictions, labels, num_classes);
  const auto agg = aggregate_f1(counts);
  const auto pos = binary_prf(counts, positive_class);
  MetricsReport r;
  r.macro_f1 = agg.macro_f1;
  r.micro_f1 = agg.micro_f1;
  r.binary_f1 = pos.f1;
  r.precision = pos.precision;
  r.recall = pos.recall;
  for (std::size_t k = 0; k < num_classes; ++k) {
    const auto prf = binary_prf(counts, k);
    r.macro_precision += prf.precision;
    r.macro_recall += prf.recall;
  }
  r.macro_precision /= static_cast<double>(num_classes);
  r.macro_recall /= static_cast<double>(num_classes);
  r.n = counts.n;
  return r;
}

std::vector<std::size_t> argmax_rows(std::span<const float> logits, std::size_t num_classes) {
  if (num_classes == 0 || logits.size() % num_classes != 0)
    throw DimensionError("logits length is not a multiple of the class count");
  std::vector<std::size_t> out(logits.size() / num_classes);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto row = logits.subspan(i * num_classes, num_classes);
    out[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double mean_cross_entropy(std::span<const float> logits, std::span<const std::size_t> labels,
                          std::size_t num_classes) {
  if (labels.empty() || logits.size() != labels.size() * num_classes)
    throw DimensionError("logits do not match labels x classes");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = logits.subspan(i * num_classes, num_classes);
    const double hi = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (float v : row) z += std::exp(static_cast<double>(v) - hi);
    total += hi + std::log(z) - static_cast<double>(row[labels[i]]);
  }
  return total / static_cast<double>(labels.size());
}

PredictionDump predict(SharedModel<float>& model, const std::string& target_task,
                       std::span<const EncodedExample> test_data, std::size_t batch_size) {
  if (test_data.empty()) throw DataError("test data is empty");
  const auto& spec = model.task(target_task);
  if (!is_classification(spec.kind)) throw ContractError("task '" + target_task + "' is not a classification task");
  PredictionDump dump;
  dump.num_classes = spec.num_classes();
  NoGradGuard no_grad;
  for (std::size_t start = 0; start < test_data.size(); start += batch_size) {
    const auto chunk = test_data.subspan(start, std::min(batch_size, test_data.size() - start));
    const Batch batch = make_batch(chunk, spec.kind);
    const auto logits = forward_task(model, target_task, batch, /*training=*/false);
    dump.logits.insert(dump.logits.end(), logits.data().begin(), logits.data().end());
    const auto& y = std::get<std::vector<std::size_t>>(batch.labels);
    dump.labels.insert(dump.labels.end(), y.begin(), y.end());
  }
  dump.predictions = argmax_rows(dump.logits, dump.num_classes);
  return dump;
}

MetricsReport report_from_dump(const PredictionDump& dump, std::size_t positive_class) {
  auto r = classification_report(dump.predictions, dump.labels, dump.num_classes, positive_class);
  r.ce_loss = mean_cross_entropy(dump.logits, dump.labels, dump.num_classes);
  return r;
}

MetricsReport evaluate_model(SharedModel<float>& model, const std::string& target_task,
                             std::span<const EncodedExample> test_data, std::size_t batch_size) {
  return report_from_dump(predict(model, target_task, test_data, batch_size));
}

MetricsReport mean_report(std::span<const MetricsReport> fold_reports) {
  if (fold_reports.empty()) throw ContractError("cannot average zero reports");
  MetricsReport m;
  for (const auto& r : fold_reports) {
    m.macro_f1 += r.macro_f1;
    m.micro_f1 += r.micro_f1;
    m.binary_f1 += r.binary_f1;
    m.precision += r.precision;
    m.recall += r.recall;
    m.macro_precision += r.macro_precision;
    m.macro_recall += r.macro_recall;
    m.ce_loss += r.ce_loss;
    m.n += r.n;
  }
  const double k = static_cast<double>(fold_reports.size());
  for (double* f : {&m.macro_f1, &m.micro_f1, &m.binary_f1, &m.precision, &m.recall, &m.macro_precision,
                    &m.macro_recall, &m.ce_loss})
    *f /= k;
  m.folds.assign(fold_reports.begin(), fold_reports.end());
  for (auto& f : m.folds) f.folds.clear();
  return m;
}

nlohmann::ordered_json report_to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["macro_f1"] = r.macro_f1;
  j["micro_f1"] = r.micro_f1;
  j["binary_f1"] = r.binary_f1;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["macro_precision"] = r.macro_precision;
  j["macro_recall"] = r.macro_recall;
  j["ce_loss"] = r.ce_loss;
  j["n"] = r.n;
  if (!r.folds.empty()) {
    j["folds"] = nlohmann::ordered_json::array();
    for (const auto& f : r.folds) j["folds"].push_back(report_to_json(f));
  }
  return j;
}

MetricsReport report_from_json(const nlohmann::ordered_json& j) {
  try {
    MetricsReport r;
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.micro_f1 = j.at("micro_f1").get<double>();
    r.binary_f1 = j.at("binary_f1").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.macro_precision = j.value("macro_precision", 0.0);
    r.macro_recall = j.value("macro_recall", 0.0);
    r.ce_loss = j.at("ce_loss").get<double>();
    r.n = j.at("n").get<std::uint64_t>();
    if (j.contains("folds"))
      for (const auto& f : j.at("folds")) r.folds.push_back(report_from_json(f));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed metrics report: ") + e.what());
  }
}

}  // namespace mtlf
