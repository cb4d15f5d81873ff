// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

namespace mtlf {

enum class TaskKind { single_classification, single_regression, pair_classification, pair_regression };
enum class LossKind { cross_entropy, mse };
enum class Domain { in_domain, cross_domain };

constexpr bool is_pair(TaskKind kind) noexcept {
  return kind == TaskKind::pair_classification || kind == TaskKind::pair_regression;
}

constexpr bool is_classification(TaskKind kind) noexcept {
  return kind == TaskKind::single_classification || kind == TaskKind::pair_classification;
}

// Classification tasks train with cross-entropy, regression tasks with MSE.
constexpr LossKind loss_for(TaskKind kind) noexcept {
  return is_classification(kind) ? LossKind::cross_entropy : LossKind::mse;
}

std::string_view to_string(TaskKind kind) noexcept;
std::string_view to_string(LossKind kind) noexcept;
std::string_view to_string(Domain domain) noexcept;

// Throw ParseError on unknown names.
TaskKind parse_task_kind(std::string_view name);
LossKind parse_loss_kind(std::string_view name);
Domain parse_domain(std::string_view name);

}  // namespace mtlf
