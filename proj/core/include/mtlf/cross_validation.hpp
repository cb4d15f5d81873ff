// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mtlf/engine.hpp"
#include "mtlf/metrics.hpp"

namespace mtlf {

struct FoldSplit {
  std::vector<std::vector<std::size_t>> folds;

  std::size_t k() const noexcept { return folds.size(); }
  /// Sorted indices of every fold except `fold`.
  std::vector<std::size_t> train_indices(std::size_t fold) const;
};

/// Seeded shuffle, then index i of the (class-grouped, if labels are given)
/// order goes to fold i mod k. Empty labels select the non-stratified mode.
/// ParameterError when k < 2 or k > n.
FoldSplit kfold_split(std::size_t n, std::size_t k, std::uint64_t seed,
                      std::span<const std::size_t> stratify_labels = {});

struct CrossValidationConfig {
  std::size_t folds = 5;
  bool stratified = true;
  std::size_t parallelism = 1;
  std::uint64_t seed = 0;  // fold partition and per-fold training streams
  TrainConfig train;       // train.seed is replaced per fold
};

/// The seed a fold's fine-tuning uses; shared by every grid entry so that
/// entries differ only in their auxiliary phase.
std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold);

struct FoldOutcome {
  std::size_t fold = 0;
  FinetuneResult finetune;
  MetricsReport report;
};

/// Returns the model a fold starts from; it must not carry a head for the
/// target task.
using ModelFactory = std::function<SharedModel<float>(std::size_t fold)>;
using FoldObserver = std::function<void(const FoldOutcome&)>;

/// For each fold: fresh model from the factory, target fine-tuning on the
/// other folds, evaluation on the held-out fold. The aggregate is the
/// unweighted mean of the fold reports, which are kept in fold order.
MetricsReport run_cross_validation(const ModelFactory& factory, const TaskSpec& target,
                                   std::span<const EncodedExample> target_data, const CrossValidationConfig& config,
                                   const FoldObserver& observer = {});

}  // namespace mtlf
