// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "mtlf/tensor.hpp"

namespace mtlf {

struct GradCheckOptions {
  double step = 1e-5;
  // Coordinates examined per tensor; 0 checks every coordinate. When limited,
  // coordinates are taken at an even stride so every region is visited.
  std::size_t max_coords_per_tensor = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t coordinates_checked = 0;
};

/// Compares reverse-mode gradients of the scalar `loss()` with central
/// differences using step h * max(1, |x_i|). The per-coordinate error is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-4).
/// Gradients of `params` are zeroed before and after the check.
GradCheckResult grad_check(const std::function<Tensor<double>()>& loss,
                           std::span<NamedParameter<double>> params,
                           const GradCheckOptions& options = {});

/// Single-input form: returns the worst relative error of f at x.
double grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                  const Tensor<double>& x, double h = 1e-5);

}  // namespace mtlf
