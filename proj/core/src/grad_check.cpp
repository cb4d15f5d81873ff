// SPDX-License-Identifier: Apache-2.0
#include "mtlf/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mtlf {

GradCheckResult grad_check(const std::function<Tensor<double>()>& loss,
                           std::span<NamedParameter<double>> params,
                           const GradCheckOptions& options) {
  for (auto& p : params) p.tensor.zero_grad();
  loss().backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) {
    if (p.tensor.has_grad()) analytic.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
    else analytic.emplace_back(p.tensor.size(), 0.0);
    p.tensor.zero_grad();
  }

  GradCheckResult result;
  NoGradGuard no_grad;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi].tensor.mutable_data();
    const std::size_t n = values.size();
    std::size_t stride = 1;
    if (options.max_coords_per_tensor > 0 && n > options.max_coords_per_tensor)
      stride = (n + options.max_coords_per_tensor - 1) / options.max_coords_per_tensor;
    for (std::size_t i = 0; i < n; i += stride) {
      const double original = values[i];
      const double h = options.step * std::max(1.0, std::abs(original));
      values[i] = original + h;
      const double plus = loss().item();
      values[i] = original - h;
      const double minus = loss().item();
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-4});
      const double err = std::abs(a - numeric) / denom;
      ++result.coordinates_checked;
      if (err > result.max_relative_error || result.coordinates_checked == 1) {
        result.max_relative_error = std::max(err, result.max_relative_error);
        result.worst_parameter = params[pi].name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

double grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                  const Tensor<double>& x, double h) {
  std::vector<NamedParameter<double>> params{{"x", x}};
  params[0].tensor.set_requires_grad(true);
  GradCheckOptions options;
  options.step = h;
  return grad_check([&] { return f(params[0].tensor); }, params, options).max_relative_error;
}

}  // namespace mtlf
