// SPDX-License-Identifier: Apache-2.0
#include "mtlf/cross_validation.hpp"

#include <algorithm>
#include <numeric>

#include "mtlf/parallel.hpp"

namespace mtlf {

std::vector<std::size_t> FoldSplit::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < folds.size(); ++f)
    if (f != fold) out.insert(out.end(), folds[f].begin(), folds[f].end());
  std::sort(out.begin(), out.end());
  return out;
}

FoldSplit kfold_split(std::size_t n, std::size_t k, std::uint64_t seed, std::span<const std::size_t> labels) {
  if (k < 2) throw ParameterError("k-fold split needs k >= 2, got " + std::to_string(k));
  if (k > n) throw ParameterError("k-fold split with k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
  if (!labels.empty() && labels.size() != n)
    throw ParameterError("stratify labels have length " + std::to_string(labels.size()) + ", expected " +
                         std::to_string(n));
  Rng rng(derive_seed(seed, "kfold"));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  if (!labels.empty()) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });
  }
  FoldSplit split;
  split.folds.resize(k);
  for (std::size_t i = 0; i < n; ++i) split.folds[i % k].push_back(order[i]);
  for (auto& f : split.folds) std::sort(f.begin(), f.end());
  return split;
}

std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold) { return derive_seed(seed, "fold", fold); }

MetricsReport run_cross_validation(const ModelFactory& factory, const TaskSpec& target,
                                   std::span<const EncodedExample> target_data, const CrossValidationConfig& config,
                                   const FoldObserver& observer) {
  if (target_data.empty()) throw DataError("cross-validation target data is empty");
  if (!is_classification(target.kind)) throw ContractError("cross-validation target must be a classification task");
  std::vector<std::size_t> labels;
  if (config.stratified) {
    labels.reserve(target_data.size());
    for (const auto& ex : target_data) {
      const auto* c = std::get_if<std::size_t>(&ex.label);
      if (!c) throw ContractError("cross-validation target examples must carry class labels");
      labels.push_back(*c);
    }
  }
  const auto split = kfold_split(target_data.size(), config.folds, config.seed, labels);

  std::vector<FoldOutcome> outcomes(config.folds);
  parallel_for(config.folds, config.parallelism, [&](std::size_t f) {
    std::vector<EncodedExample> train, test;
    for (auto i : split.train_indices(f)) train.push_back(target_data[i]);
    for (auto i : split.folds[f]) test.push_back(target_data[i]);

    TrainConfig tc = config.train;
    tc.seed = fold_seed(config.seed, f);
    SharedModel<float> model = factory(f);
    if (model.has_task(target.name))
      throw ContractError("fold model already carries a head for '" + target.name + "'");
    model.reseed_dropout(derive_seed(tc.seed, "dropout"));

    FoldOutcome& out = outcomes[f];
    out.fold = f;
    out.finetune = run_target_finetune(model, target, train, tc);
    out.report = evaluate_model(model, target.name, test, tc.batch_size);
  });

  std::vector<MetricsReport> reports;
  for (const auto& o : outcomes) {
    if (observer) observer(o);
    reports.push_back(o.report);
  }
  return mean_report(reports);
}

}  // namespace mtlf
