// SPDX-License-Identifier: Apache-2.0
// Independent reference implementations used to cross-check the library.
// Deliberately naive: no shared code with mtlf beyond plain containers.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace mtlf::oracle {

struct Metrics {
  double macro_f1 = 0, micro_f1 = 0, binary_f1 = 0, precision = 0, recall = 0, accuracy = 0;
};

inline double safe_div(double a, double b) { return b == 0.0 ? 0.0 : a / b; }

inline double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

// Precision/recall per class by explicit pair counting, F1 as their
// harmonic mean; micro from pooled counts.
inline Metrics brute_force_metrics(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& gold,
                                   std::size_t classes, std::size_t positive = 1) {
  Metrics m;
  double pooled_tp = 0, pooled_fp = 0, pooled_fn = 0, correct = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] == c && gold[i] == c) tp += 1;
      if (pred[i] == c && gold[i] != c) fp += 1;
      if (pred[i] != c && gold[i] == c) fn += 1;
    }
    const double p = safe_div(tp, tp + fp), r = safe_div(tp, tp + fn);
    m.macro_f1 += harmonic(p, r) / static_cast<double>(classes);
    if (c == positive) {
      m.precision = p;
      m.recall = r;
      m.binary_f1 = harmonic(p, r);
    }
    pooled_tp += tp;
    pooled_fp += fp;
    pooled_fn += fn;
  }
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == gold[i] ? 1 : 0;
  m.micro_f1 = harmonic(safe_div(pooled_tp, pooled_tp + pooled_fp), safe_div(pooled_tp, pooled_tp + pooled_fn));
  m.accuracy = safe_div(correct, static_cast<double>(pred.size()));
  return m;
}

// Scalar AdamW, PyTorch ordering: decoupled decay, then the Adam update.
struct ScalarAdamW {
  double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay = 0.0;
  double m = 0, v = 0;
  int t = 0;

  double step(double w, double g) {
    t += 1;
    w = w - lr * weight_decay * w;
    m = beta1 * m + (1 - beta1) * g;
    v = beta2 * v + (1 - beta2) * g * g;
    const double mhat = m / (1 - std::pow(beta1, t));
    const double vhat = v / (1 - std::pow(beta2, t));
    return w - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

// Row-major [m,k] x [k,n].
inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                  std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) c[i * n + j] += a[i * k + p] * b[p * n + j];
  return c;
}

}  // namespace mtlf::oracle
