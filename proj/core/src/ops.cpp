// SPDX-License-Identifier: Apache-2.0
#include "mtlf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace mtlf::ops {

namespace {

// C[r,s] += A[r,t] * B[t,s]
template <typename T>
void acc_ab(const T* a, const T* b, T* c, std::size_t r, std::size_t t, std::size_t s) {
  for (std::size_t i = 0; i < r; ++i) {
    T* crow = c + i * s;
    const T* arow = a + i * t;
    for (std::size_t p = 0; p < t; ++p) {
      const T av = arow[p];
      const T* brow = b + p * s;
      for (std::size_t j = 0; j < s; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[r,s] += A[t,r]^T * B[t,s]
template <typename T>
void acc_atb(const T* a, const T* b, T* c, std::size_t r, std::size_t t, std::size_t s) {
  for (std::size_t p = 0; p < t; ++p) {
    const T* arow = a + p * r;
    const T* brow = b + p * s;
    for (std::size_t i = 0; i < r; ++i) {
      const T av = arow[i];
      T* crow = c + i * s;
      for (std::size_t j = 0; j < s; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[r,s] += A[r,t] * B[s,t]^T, via an explicit transpose of B so the inner
// loop stays contiguous.
template <typename T>
void acc_abt(const T* a, const T* b, T* c, std::size_t r, std::size_t t, std::size_t s,
             std::vector<T>& scratch) {
  scratch.resize(t * s);
  for (std::size_t j = 0; j < s; ++j) {
    for (std::size_t p = 0; p < t; ++p) scratch[p * s + j] = b[j * t + p];
  }
  acc_ab(a, scratch.data(), c, r, t, s);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw DimensionError(message);
}

template <typename T>
std::string shapes(const Tensor<T>& a, const Tensor<T>& b) {
  return shape_string(a.shape()) + " and " + shape_string(b.shape());
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
          "matmul: incompatible shapes " + shapes(a, b));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n, T(0));
  acc_ab(a.data().data(), b.data().data(), out.data(), m, k, n);
  return Tensor<T>::from_op("matmul", {m, n}, std::move(out), {a, b},
                            [m, k, n](typename Tensor<T>::Node& self) {
                              auto& A = *self.parents[0];
                              auto& B = *self.parents[1];
                              std::vector<T> scratch;
                              if (auto ga = A.grad_sink(); !ga.empty())
                                acc_abt(self.grad.data(), B.data.data(), ga.data(), m, n, k, scratch);
                              if (auto gb = B.grad_sink(); !gb.empty())
                                acc_atb(A.data.data(), self.grad.data(), gb.data(), k, m, n);
                            });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require(x.rank() >= 1 && weight.rank() == 2 && x.shape().back() == weight.dim(0),
          "linear: incompatible shapes " + shapes(x, weight));
  const std::size_t in = weight.dim(0), out_dim = weight.dim(1);
  const bool has_bias = bias.defined();
  if (has_bias) {
    require(bias.rank() == 1 && bias.dim(0) == out_dim,
            "linear: bias " + shape_string(bias.shape()) + " does not match weight " +
                shape_string(weight.shape()));
  }
  const std::size_t rows = x.size() / in;
  std::vector<T> out(rows * out_dim, T(0));
  if (has_bias) {
    auto bd = bias.data();
    for (std::size_t i = 0; i < rows; ++i) std::copy(bd.begin(), bd.end(), out.begin() + i * out_dim);
  }
  acc_ab(x.data().data(), weight.data().data(), out.data(), rows, in, out_dim);
  Shape shape = x.shape();
  shape.back() = out_dim;
  auto backward = [rows, in, out_dim, has_bias](typename Tensor<T>::Node& self) {
    auto& X = *self.parents[0];
    auto& W = *self.parents[1];
    const T* g = self.grad.data();
    std::vector<T> scratch;
    if (auto gx = X.grad_sink(); !gx.empty()) acc_abt(g, W.data.data(), gx.data(), rows, out_dim, in, scratch);
    if (auto gw = W.grad_sink(); !gw.empty()) acc_atb(X.data.data(), g, gw.data(), in, rows, out_dim);
    if (has_bias) {
      if (auto gb = self.parents[2]->grad_sink(); !gb.empty()) {
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < out_dim; ++j) gb[j] += g[i * out_dim + j];
      }
    }
  };
  if (has_bias) return Tensor<T>::from_op("linear", std::move(shape), std::move(out), {x, weight, bias}, backward);
  return Tensor<T>::from_op("linear", std::move(shape), std::move(out), {x, weight}, backward);
}

template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b) {
  require(a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0),
          "bmm: incompatible shapes " + shapes(a, b));
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  require((transpose_b ? b.dim(2) : b.dim(1)) == k, "bmm: inner dimensions differ for " + shapes(a, b));
  std::vector<T> out(batch * m * n, T(0));
  {
    std::vector<T> scratch;
    for (std::size_t i = 0; i < batch; ++i) {
      const T* ap = a.data().data() + i * m * k;
      const T* bp = b.data().data() + i * k * n;
      T* cp = out.data() + i * m * n;
      if (transpose_b) acc_abt(ap, bp, cp, m, k, n, scratch);
      else acc_ab(ap, bp, cp, m, k, n);
    }
  }
  return Tensor<T>::from_op(
      "bmm", {batch, m, n}, std::move(out), {a, b},
      [batch, m, k, n, transpose_b](typename Tensor<T>::Node& self) {
        auto& A = *self.parents[0];
        auto& B = *self.parents[1];
        auto ga = A.grad_sink();
        auto gb = B.grad_sink();
        std::vector<T> scratch;
        for (std::size_t i = 0; i < batch; ++i) {
          const T* g = self.grad.data() + i * m * n;
          const T* ap = A.data.data() + i * m * k;
          const T* bp = B.data.data() + i * k * n;
          if (transpose_b) {
            if (!ga.empty()) acc_ab(g, bp, ga.data() + i * m * k, m, n, k);
            if (!gb.empty()) acc_atb(g, ap, gb.data() + i * k * n, n, m, k);
          } else {
            if (!ga.empty()) acc_abt(g, bp, ga.data() + i * m * k, m, n, k, scratch);
            if (!gb.empty()) acc_atb(ap, g, gb.data() + i * k * n, k, m, n);
          }
        }
      });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + shapes(a, b));
  std::vector<T> out(a.size());
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  return Tensor<T>::from_op("add", a.shape(), std::move(out), {a, b}, [](typename Tensor<T>::Node& self) {
    for (auto& parent : self.parents) {
      if (auto g = parent->grad_sink(); !g.empty())
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch " + shapes(a, b));
  std::vector<T> out(a.size());
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  return Tensor<T>::from_op("mul", a.shape(), std::move(out), {a, b}, [](typename Tensor<T>::Node& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    // Read both operands before accumulating: A and B may be the same node.
    if (auto ga = A.grad_sink(); !ga.empty())
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * B.data[i];
    if (auto gb = B.grad_sink(); !gb.empty())
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += self.grad[i] * A.data[i];
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.size());
  auto ad = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * factor;
  return Tensor<T>::from_op("scale", a.shape(), std::move(out), {a}, [factor](typename Tensor<T>::Node& self) {
    if (auto g = self.parents[0]->grad_sink(); !g.empty())
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = T(0);
  for (T v : a.data()) total += v;
  return Tensor<T>::from_op("sum", {1}, {total}, {a}, [](typename Tensor<T>::Node& self) {
    if (auto g = self.parents[0]->grad_sink(); !g.empty())
      for (auto& v : g) v += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  if (a.size() == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  require(numel(shape) == a.size(),
          "reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
  std::vector<T> out(a.data().begin(), a.data().end());
  return Tensor<T>::from_op("reshape", std::move(shape), std::move(out), {a}, [](typename Tensor<T>::Node& self) {
    if (auto g = self.parents[0]->grad_sink(); !g.empty())
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T kSqrt2OverPi = T(0.7978845608028654);  // sqrt(2 / pi)
  constexpr T kCubic = T(0.044715);
  std::vector<T> out(x.size());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = xd[i];
    out[i] = T(0.5) * v * (T(1) + std::tanh(kSqrt2OverPi * (v + kCubic * v * v * v)));
  }
  return Tensor<T>::from_op("gelu", x.shape(), std::move(out), {x}, [](typename Tensor<T>::Node& self) {
    auto& X = *self.parents[0];
    if (auto g = X.grad_sink(); !g.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T v = X.data[i];
        const T th = std::tanh(kSqrt2OverPi * (v + kCubic * v * v * v));
        const T d = T(0.5) * (T(1) + th) +
                    T(0.5) * v * (T(1) - th * th) * kSqrt2OverPi * (T(1) + T(3) * kCubic * v * v);
        g[i] += self.grad[i] * d;
      }
    }
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for shape " +
                         shape_string(x.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t len = x.dim(axis);
  std::vector<T> out(x.size());
  auto xd = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t l = 0; l < len; ++l) mx = std::max(mx, xd[base + l * inner]);
      T total = T(0);
      for (std::size_t l = 0; l < len; ++l) {
        const T e = std::exp(xd[base + l * inner] - mx);
        out[base + l * inner] = e;
        total += e;
      }
      for (std::size_t l = 0; l < len; ++l) out[base + l * inner] /= total;
    }
  }
  return Tensor<T>::from_op("softmax", x.shape(), std::move(out), {x},
                            [outer, inner, len](typename Tensor<T>::Node& self) {
                              auto g = self.parents[0]->grad_sink();
                              if (g.empty()) return;
                              const auto& y = self.data;
                              for (std::size_t o = 0; o < outer; ++o) {
                                for (std::size_t in = 0; in < inner; ++in) {
                                  const std::size_t base = o * len * inner + in;
                                  T dot = T(0);
                                  for (std::size_t l = 0; l < len; ++l)
                                    dot += y[base + l * inner] * self.grad[base + l * inner];
                                  for (std::size_t l = 0; l < len; ++l) {
                                    const std::size_t idx = base + l * inner;
                                    g[idx] += y[idx] * (self.grad[idx] - dot);
                                  }
                                }
                              }
                            });
}

template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& scores, std::span<const std::uint8_t> key_mask,
                         std::size_t heads, T scale) {
  require(scores.rank() == 3, "masked_softmax: expected [B*H,T,T], got " + shape_string(scores.shape()));
  require(heads >= 1 && scores.dim(0) % heads == 0, "masked_softmax: batch*heads not divisible by heads");
  const std::size_t rows_per = scores.dim(1), keys = scores.dim(2);
  const std::size_t batch = scores.dim(0) / heads;
  require(key_mask.size() == batch * keys,
          "masked_softmax: mask length " + std::to_string(key_mask.size()) + " does not match " +
              std::to_string(batch) + "x" + std::to_string(keys));
  std::vector<T> out(scores.size(), T(0));
  auto sd = scores.data();
  for (std::size_t bh = 0; bh < scores.dim(0); ++bh) {
    const std::uint8_t* mask = key_mask.data() + (bh / heads) * keys;
    for (std::size_t q = 0; q < rows_per; ++q) {
      const std::size_t base = (bh * rows_per + q) * keys;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < keys; ++j)
        if (mask[j]) mx = std::max(mx, scale * sd[base + j]);
      if (!std::isfinite(mx)) continue;  // every key masked: row stays zero
      T total = T(0);
      for (std::size_t j = 0; j < keys; ++j) {
        if (!mask[j]) continue;
        const T e = std::exp(scale * sd[base + j] - mx);
        out[base + j] = e;
        total += e;
      }
      for (std::size_t j = 0; j < keys; ++j) out[base + j] /= total;
    }
  }
  return Tensor<T>::from_op("masked_softmax", scores.shape(), std::move(out), {scores},
                            [keys, scale](typename Tensor<T>::Node& self) {
                              auto g = self.parents[0]->grad_sink();
                              if (g.empty()) return;
                              const auto& y = self.data;
                              for (std::size_t base = 0; base < y.size(); base += keys) {
                                T dot = T(0);
                                for (std::size_t j = 0; j < keys; ++j) dot += y[base + j] * self.grad[base + j];
                                for (std::size_t j = 0; j < keys; ++j)
                                  g[base + j] += scale * y[base + j] * (self.grad[base + j] - dot);
                              }
                            });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  require(x.rank() >= 1, "layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  require(gamma.rank() == 1 && gamma.dim(0) == d && beta.rank() == 1 && beta.dim(0) == d,
          "layer_norm: gamma/beta " + shape_string(gamma.shape()) + "/" + shape_string(beta.shape()) +
              " do not match last dimension of " + shape_string(x.shape()));
  const std::size_t rows = x.size() / d;
  std::vector<T> out(x.size()), xhat(x.size()), rstd(rows);
  auto xd = x.data();
  auto gd = gamma.data();
  auto bd = beta.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xd.data() + r * d;
    T mu = T(0);
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<T>(d);
    T var = T(0);
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(d);
    const T rs = T(1) / std::sqrt(var + eps);
    rstd[r] = rs;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (row[j] - mu) * rs;
      xhat[r * d + j] = h;
      out[r * d + j] = gd[j] * h + bd[j];
    }
  }
  return Tensor<T>::from_op(
      "layer_norm", x.shape(), std::move(out), {x, gamma, beta},
      [rows, d, xhat = std::move(xhat), rstd = std::move(rstd)](typename Tensor<T>::Node& self) {
        auto& G = *self.parents[1];
        auto gx = self.parents[0]->grad_sink();
        auto gg = G.grad_sink();
        auto gb = self.parents[2]->grad_sink();
        std::vector<T> dxhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* gy = self.grad.data() + r * d;
          const T* h = xhat.data() + r * d;
          T mean_d = T(0), mean_dh = T(0);
          for (std::size_t j = 0; j < d; ++j) {
            dxhat[j] = gy[j] * G.data[j];
            mean_d += dxhat[j];
            mean_dh += dxhat[j] * h[j];
            if (!gg.empty()) gg[j] += gy[j] * h[j];
            if (!gb.empty()) gb[j] += gy[j];
          }
          if (gx.empty()) continue;
          mean_d /= static_cast<T>(d);
          mean_dh /= static_cast<T>(d);
          for (std::size_t j = 0; j < d; ++j)
            gx[r * d + j] += rstd[r] * (dxhat[j] - mean_d - h[j] * mean_dh);
        }
      });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ParameterError("dropout probability must lie in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) return x;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(x.size());
  std::vector<T> out(x.size());
  auto xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = uniform(rng) < p ? T(0) : keep_scale;
    out[i] = xd[i] * mask[i];
  }
  return Tensor<T>::from_op("dropout", x.shape(), std::move(out), {x},
                            [mask = std::move(mask)](typename Tensor<T>::Node& self) {
                              if (auto g = self.parents[0]->grad_sink(); !g.empty())
                                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
                            });
}

template <typename T>
Tensor<T> embedding(const Tensor<T>& weight, std::span<const std::int32_t> ids) {
  require(weight.rank() == 2, "embedding: weight must be 2-d, got " + shape_string(weight.shape()));
  const std::size_t vocab = weight.dim(0), d = weight.dim(1);
  std::vector<std::int32_t> rows(ids.begin(), ids.end());
  std::vector<T> out(rows.size() * d);
  auto wd = weight.data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || static_cast<std::size_t>(rows[i]) >= vocab) {
      throw EncodingError("token id " + std::to_string(rows[i]) + " at position " + std::to_string(i) +
                          " out of range for vocabulary of size " + std::to_string(vocab));
    }
    std::copy_n(wd.begin() + static_cast<std::size_t>(rows[i]) * d, d, out.begin() + i * d);
  }
  return Tensor<T>::from_op("embedding", {ids.size(), d}, std::move(out), {weight},
                            [d, rows = std::move(rows)](typename Tensor<T>::Node& self) {
                              auto g = self.parents[0]->grad_sink();
                              if (g.empty()) return;
                              for (std::size_t i = 0; i < rows.size(); ++i) {
                                T* dst = g.data() + static_cast<std::size_t>(rows[i]) * d;
                                const T* src = self.grad.data() + i * d;
                                for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                              }
                            });
}

template <typename T>
Tensor<T> split_heads(const Tensor<T>& x, std::size_t heads) {
  require(x.rank() == 3 && heads >= 1 && x.dim(2) % heads == 0,
          "split_heads: cannot split " + shape_string(x.shape()) + " into " + std::to_string(heads) + " heads");
  const std::size_t B = x.dim(0), T_ = x.dim(1), D = x.dim(2), dh = D / heads;
  std::vector<T> out(x.size());
  auto xd = x.data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T_; ++t)
      for (std::size_t h = 0; h < heads; ++h)
        std::copy_n(xd.begin() + (b * T_ + t) * D + h * dh, dh, out.begin() + ((b * heads + h) * T_ + t) * dh);
  return Tensor<T>::from_op("split_heads", {B * heads, T_, dh}, std::move(out), {x},
                            [B, T_, D, dh, heads](typename Tensor<T>::Node& self) {
                              auto g = self.parents[0]->grad_sink();
                              if (g.empty()) return;
                              for (std::size_t b = 0; b < B; ++b)
                                for (std::size_t t = 0; t < T_; ++t)
                                  for (std::size_t h = 0; h < heads; ++h) {
                                    T* dst = g.data() + (b * T_ + t) * D + h * dh;
                                    const T* src = self.grad.data() + ((b * heads + h) * T_ + t) * dh;
                                    for (std::size_t e = 0; e < dh; ++e) dst[e] += src[e];
                                  }
                            });
}

template <typename T>
Tensor<T> merge_heads(const Tensor<T>& x, std::size_t heads) {
  require(x.rank() == 3 && heads >= 1 && x.dim(0) % heads == 0,
          "merge_heads: cannot merge " + shape_string(x.shape()) + " over " + std::to_string(heads) + " heads");
  const std::size_t B = x.dim(0) / heads, T_ = x.dim(1), dh = x.dim(2), D = dh * heads;
  std::vector<T> out(x.size());
  auto xd = x.data();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T_; ++t)
      for (std::size_t h = 0; h < heads; ++h)
        std::copy_n(xd.begin() + ((b * heads + h) * T_ + t) * dh, dh, out.begin() + (b * T_ + t) * D + h * dh);
  return Tensor<T>::from_op("merge_heads", {B, T_, D}, std::move(out), {x},
                            [B, T_, D, dh, heads](typename Tensor<T>::Node& self) {
                              auto g = self.parents[0]->grad_sink();
                              if (g.empty()) return;
                              for (std::size_t b = 0; b < B; ++b)
                                for (std::size_t t = 0; t < T_; ++t)
                                  for (std::size_t h = 0; h < heads; ++h) {
                                    T* dst = g.data() + ((b * heads + h) * T_ + t) * dh;
                                    const T* src = self.grad.data() + (b * T_ + t) * D + h * dh;
                                    for (std::size_t e = 0; e < dh; ++e) dst[e] += src[e];
                                  }
                            });
}

template <typename T>
Tensor<T> select_position(const Tensor<T>& hidden, std::size_t position) {
  require(hidden.rank() == 3 && position < hidden.dim(1),
          "select_position: position " + std::to_string(position) + " invalid for " +
              shape_string(hidden.shape()));
  const std::size_t B = hidden.dim(0), T_ = hidden.dim(1), d = hidden.dim(2);
  std::vector<T> out(B * d);
  auto hd = hidden.data();
  for (std::size_t b = 0; b < B; ++b) std::copy_n(hd.begin() + (b * T_ + position) * d, d, out.begin() + b * d);
  return Tensor<T>::from_op("select_position", {B, d}, std::move(out), {hidden},
                            [B, T_, d, position](typename Tensor<T>::Node& self) {
                              auto g = self.parents[0]->grad_sink();
                              if (g.empty()) return;
                              for (std::size_t b = 0; b < B; ++b)
                                for (std::size_t j = 0; j < d; ++j)
                                  g[(b * T_ + position) * d + j] += self.grad[b * d + j];
                            });
}

template <typename T>
Tensor<T> cross_entropy_loss(const Tensor<T>& logits, std::span<const std::size_t> labels) {
  require(logits.rank() == 2, "cross_entropy_loss: logits must be [B,C], got " + shape_string(logits.shape()));
  const std::size_t B = logits.dim(0), C = logits.dim(1);
  require(B >= 1 && labels.size() == B,
          "cross_entropy_loss: " + std::to_string(labels.size()) + " labels for logits " +
              shape_string(logits.shape()));
  for (std::size_t i = 0; i < B; ++i) {
    if (labels[i] >= C) {
      throw LabelError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                       " out of range for " + std::to_string(C) + " classes");
    }
  }
  std::vector<T> probs(B * C);
  std::vector<std::size_t> targets(labels.begin(), labels.end());
  auto ld = logits.data();
  double total = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    const T* row = ld.data() + i * C;
    T mx = *std::max_element(row, row + C);
    T z = T(0);
    for (std::size_t c = 0; c < C; ++c) {
      probs[i * C + c] = std::exp(row[c] - mx);
      z += probs[i * C + c];
    }
    for (std::size_t c = 0; c < C; ++c) probs[i * C + c] /= z;
    total += static_cast<double>(std::log(z) + mx - row[targets[i]]);
  }
  const T loss = static_cast<T>(total / static_cast<double>(B));
  return Tensor<T>::from_op("cross_entropy_loss", {1}, {std::max(loss, T(0))}, {logits},
                            [B, C, probs = std::move(probs), targets = std::move(targets)](
                                typename Tensor<T>::Node& self) {
                              auto g = self.parents[0]->grad_sink();
                              if (g.empty()) return;
                              const T s = self.grad[0] / static_cast<T>(B);
                              for (std::size_t i = 0; i < B; ++i)
                                for (std::size_t c = 0; c < C; ++c)
                                  g[i * C + c] += s * (probs[i * C + c] - (c == targets[i] ? T(1) : T(0)));
                            });
}

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require(pred.rank() == 1 && target.rank() == 1 && pred.dim(0) == target.dim(0) && pred.dim(0) >= 1,
          "mse_loss: shape mismatch " + shapes(pred, target));
  const std::size_t B = pred.dim(0);
  auto pd = pred.data();
  auto td = target.data();
  T total = T(0);
  for (std::size_t i = 0; i < B; ++i) total += (pd[i] - td[i]) * (pd[i] - td[i]);
  return Tensor<T>::from_op("mse_loss", {1}, {total / static_cast<T>(B)}, {pred, target},
                            [B](typename Tensor<T>::Node& self) {
                              auto& P = *self.parents[0];
                              auto& Q = *self.parents[1];
                              const T s = T(2) * self.grad[0] / static_cast<T>(B);
                              if (auto gp = P.grad_sink(); !gp.empty())
                                for (std::size_t i = 0; i < B; ++i) gp[i] += s * (P.data[i] - Q.data[i]);
                              if (auto gq = Q.grad_sink(); !gq.empty())
                                for (std::size_t i = 0; i < B; ++i) gq[i] -= s * (P.data[i] - Q.data[i]);
                            });
}

template <typename T>
double clip_grad_norm(std::span<NamedParameter<T>> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (T g : p.tensor.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T factor = static_cast<T>(max_norm / (norm + 1e-6));
    for (auto& p : params)
      if (p.tensor.has_grad())
        for (T& g : p.tensor.mutable_grad()) g *= factor;
  }
  return norm;
}

#define MTLF_INSTANTIATE_OPS(T)                                                                      \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> bmm(const Tensor<T>&, const Tensor<T>&, bool);                                  \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                        \
  template Tensor<T> scale(const Tensor<T>&, T);                                                     \
  template Tensor<T> sum(const Tensor<T>&);                                                          \
  template Tensor<T> mean(const Tensor<T>&);                                                         \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                               \
  template Tensor<T> gelu(const Tensor<T>&);                                                         \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                         \
  template Tensor<T> masked_softmax(const Tensor<T>&, std::span<const std::uint8_t>, std::size_t, T); \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);            \
  template Tensor<T> dropout(const Tensor<T>&, double, bool, Rng&);                                  \
  template Tensor<T> embedding(const Tensor<T>&, std::span<const std::int32_t>);                     \
  template Tensor<T> split_heads(const Tensor<T>&, std::size_t);                                     \
  template Tensor<T> merge_heads(const Tensor<T>&, std::size_t);                                     \
  template Tensor<T> select_position(const Tensor<T>&, std::size_t);                                 \
  template Tensor<T> cross_entropy_loss(const Tensor<T>&, std::span<const std::size_t>);             \
  template Tensor<T> mse_loss(const Tensor<T>&, const Tensor<T>&);                                   \
  template double clip_grad_norm(std::span<NamedParameter<T>>, double);

MTLF_INSTANTIATE_OPS(float)
MTLF_INSTANTIATE_OPS(double)

#undef MTLF_INSTANTIATE_OPS

}  // namespace mtlf::ops
