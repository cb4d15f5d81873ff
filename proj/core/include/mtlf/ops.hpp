// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>

#include "mtlf/random.hpp"
#include "mtlf/tensor.hpp"

// Differentiable primitives. Every op validates shapes, rejects non-finite
// results, and records a backward closure when any input requires grad.
namespace mtlf::ops {

/// [m,k] x [k,n] -> [m,n].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// x[..., in] * w[in, out] (+ bias[out]) -> [..., out]. Leading dims are
/// flattened into rows. Pass an undefined tensor to skip the bias.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// Batched product over the leading dim: [N,m,k] x [N,k,n] -> [N,m,n], or
/// with transpose_b: [N,m,k] x [N,n,k]^T -> [N,m,n].
template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b = false);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

/// Sum of all elements -> [1].
template <typename T>
Tensor<T> sum(const Tensor<T>& a);

/// Mean of all elements -> [1].
template <typename T>
Tensor<T> mean(const Tensor<T>& a);

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);

/// tanh-approximated GELU:
///   0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 * x^3)))
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

/// Softmax along `axis`, max-subtracted.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

/// Softmax of scale * scores over the last axis of scores[B*H, T, T], where
/// key position j of sequence b participates only if key_mask[b*T + j] != 0.
/// Masked keys receive exactly zero weight (equivalent to a -inf logit).
template <typename T>
Tensor<T> masked_softmax(const Tensor<T>& scores, std::span<const std::uint8_t> key_mask,
                         std::size_t heads, T scale);

/// Normalizes each row over the last dimension, then applies gamma/beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-12));

/// Inverted dropout; identity in eval mode or when p == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng& rng);

/// Gathers rows of weight[V, d] -> [ids.size(), d].
template <typename T>
Tensor<T> embedding(const Tensor<T>& weight, std::span<const std::int32_t> ids);

/// [B, T, H*dh] -> [B*H, T, dh].
template <typename T>
Tensor<T> split_heads(const Tensor<T>& x, std::size_t heads);

/// [B*H, T, dh] -> [B, T, H*dh].
template <typename T>
Tensor<T> merge_heads(const Tensor<T>& x, std::size_t heads);

/// hidden[B, T, d] -> [B, d] at sequence position `position`.
template <typename T>
Tensor<T> select_position(const Tensor<T>& hidden, std::size_t position);

/// Mean negative log-likelihood of `labels` under softmax(logits[B, C]).
template <typename T>
Tensor<T> cross_entropy_loss(const Tensor<T>& logits, std::span<const std::size_t> labels);

/// Mean of (pred - target)^2 over [B]-shaped tensors.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// Rescales gradients in place so their global L2 norm is at most max_norm.
/// Returns the pre-clipping norm.
template <typename T>
double clip_grad_norm(std::span<NamedParameter<T>> params, double max_norm);

}  // namespace mtlf::ops
