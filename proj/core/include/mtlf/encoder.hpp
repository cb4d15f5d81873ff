// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtlf/ops.hpp"
#include "mtlf/random.hpp"
#include "mtlf/tensor.hpp"

namespace mtlf {

struct EncoderConfig {
  std::size_t vocab_size = 30522;
  std::size_t max_len = 128;
  std::size_t hidden_dim = 768;
  std::size_t num_layers = 6;
  std::size_t num_heads = 12;
  std::size_t ffn_dim = 3072;
  double dropout_p = 0.1;
  std::uint64_t seed = 0;

  void validate() const;  // ConfigError

  /// 6 layers, 12 heads, d=768, ffn=3072.
  static EncoderConfig paper_profile(std::size_t vocab_size);
  /// 2 layers, 2 heads, d=64, ffn=128.
  static EncoderConfig desk_profile(std::size_t vocab_size);
  /// "paper" or "desk"; ConfigError otherwise.
  static EncoderConfig profile(const std::string& name, std::size_t vocab_size);

  bool operator==(const EncoderConfig&) const = default;
};

template <typename T>
struct EncoderLayerParams {
  Tensor<T> query_weight, query_bias;
  Tensor<T> key_weight, key_bias;
  Tensor<T> value_weight, value_bias;
  Tensor<T> output_weight, output_bias;
  Tensor<T> attention_norm_gain, attention_norm_bias;
  Tensor<T> ffn_in_weight, ffn_in_bias;
  Tensor<T> ffn_out_weight, ffn_out_bias;
  Tensor<T> ffn_norm_gain, ffn_norm_bias;
};

template <typename T>
struct EncoderParams {
  Tensor<T> token_embedding;     // [vocab, d]
  Tensor<T> position_embedding;  // [max_len, d]
  std::vector<EncoderLayerParams<T>> layers;

  /// Stable, ordered list of every shared parameter.
  std::vector<NamedParameter<T>> named_parameters() const;
  /// Deep copy.
  EncoderParams clone() const;
};

/// Encoder input: row-major [batch, seq_len] ids and a 0/1 attention mask.
struct BatchInput {
  std::size_t batch_size = 0;
  std::size_t seq_len = 0;
  std::vector<std::int32_t> token_ids;
  std::vector<std::uint8_t> mask;
};

/// Truncated normal (std 0.02, cut at 2 std) for weights and embeddings,
/// zero biases, unit layer-norm gains. Values are drawn in double precision
/// so float and double models built from one seed agree up to rounding.
template <typename T>
EncoderParams<T> init_encoder(const EncoderConfig& config, Rng& rng);

/// Seeds the generator from config.seed.
template <typename T>
EncoderParams<T> init_encoder(const EncoderConfig& config);

/// Scaled dot-product attention over unmasked keys, heads concatenated and
/// projected by the output weights. When `attention_weights` is non-null it
/// receives the [B*H, T, T] probabilities.
template <typename T>
Tensor<T> multi_head_self_attention(const Tensor<T>& x, const std::vector<std::uint8_t>& mask,
                                    const EncoderLayerParams<T>& layer, std::size_t num_heads,
                                    std::vector<T>* attention_weights = nullptr);

/// One post-norm block: h = LN(x + drop(attn(x))); LN(h + drop(ffn(h))).
template <typename T>
Tensor<T> encoder_block(const Tensor<T>& x, const std::vector<std::uint8_t>& mask,
                        const EncoderLayerParams<T>& layer, const EncoderConfig& config, bool training,
                        Rng& rng);

/// Token + position embeddings followed by every block; returns [B, T, d].
template <typename T>
Tensor<T> encode_sequence(const EncoderParams<T>& params, const EncoderConfig& config, const BatchInput& input,
                          bool training, Rng& rng);

/// Position-0 ([CLS]) rows of the last hidden state: [B, T, d] -> [B, d].
template <typename T>
Tensor<T> pool_cls(const Tensor<T>& hidden);

}  // namespace mtlf
