// SPDX-License-Identifier: Apache-2.0
#include "mtlf/task_kind.hpp"

#include "mtlf/error.hpp"

namespace mtlf {

std::string_view to_string(TaskKind kind) noexcept {
  switch (kind) {
    case TaskKind::single_classification: return "single_classification";
    case TaskKind::single_regression: return "single_regression";
    case TaskKind::pair_classification: return "pair_classification";
    case TaskKind::pair_regression: return "pair_regression";
  }
  return "unknown";
}

std::string_view to_string(LossKind kind) noexcept {
  return kind == LossKind::cross_entropy ? "CE" : "MSE";
}

std::string_view to_string(Domain domain) noexcept {
  return domain == Domain::in_domain ? "in_domain" : "cross_domain";
}

TaskKind parse_task_kind(std::string_view name) {
  for (auto kind : {TaskKind::single_classification, TaskKind::single_regression,
                    TaskKind::pair_classification, TaskKind::pair_regression}) {
    if (to_string(kind) == name) return kind;
  }
  throw ParseError("unknown task_kind '" + std::string(name) + "'");
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "CE") return LossKind::cross_entropy;
  if (name == "MSE") return LossKind::mse;
  throw ParseError("unknown loss kind '" + std::string(name) + "'");
}

Domain parse_domain(std::string_view name) {
  if (name == "in_domain") return Domain::in_domain;
  if (name == "cross_domain") return Domain::cross_domain;
  throw ParseError("unknown domain '" + std::string(name) + "'");
}

}  // namespace mtlf
