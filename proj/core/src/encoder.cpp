// SPDX-License-Identifier: Apache-2.0
#include "mtlf/encoder.hpp"

#include <cmath>

namespace mtlf {

void EncoderConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw ConfigError(std::string("encoder ") + name + " must be at least 1");
  };
  positive(vocab_size, "vocab_size");
  positive(max_len, "max_len");
  positive(hidden_dim, "hidden_dim");
  positive(num_layers, "num_layers");
  positive(num_heads, "num_heads");
  positive(ffn_dim, "ffn_dim");
  if (hidden_dim % num_heads != 0) {
    throw ConfigError("hidden_dim " + std::to_string(hidden_dim) + " is not divisible by num_heads " +
                      std::to_string(num_heads));
  }
  if (ffn_dim < hidden_dim) throw ConfigError("ffn_dim must be at least hidden_dim");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout_p must lie in [0, 1)");
}

EncoderConfig EncoderConfig::paper_profile(std::size_t vocab_size) {
  EncoderConfig c;
  c.vocab_size = vocab_size;
  return c;
}

EncoderConfig EncoderConfig::desk_profile(std::size_t vocab_size) {
  EncoderConfig c;
  c.vocab_size = vocab_size;
  c.hidden_dim = 64;
  c.num_layers = 2;
  c.num_heads = 2;
  c.ffn_dim = 128;
  return c;
}

EncoderConfig EncoderConfig::profile(const std::string& name, std::size_t vocab_size) {
  if (name == "paper") return paper_profile(vocab_size);
  if (name == "desk") return desk_profile(vocab_size);
  throw ConfigError("unknown encoder profile '" + name + "' (expected paper or desk)");
}

template <typename T>
std::vector<NamedParameter<T>> EncoderParams<T>::named_parameters() const {
  std::vector<NamedParameter<T>> out{{"embeddings.token", token_embedding},
                                     {"embeddings.position", position_embedding}};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string p = "layers." + std::to_string(i) + ".";
    out.push_back({p + "attention.query.weight", l.query_weight});
    out.push_back({p + "attention.query.bias", l.query_bias});
    out.push_back({p + "attention.key.weight", l.key_weight});
    out.push_back({p + "attention.key.bias", l.key_bias});
    out.push_back({p + "attention.value.weight", l.value_weight});
    out.push_back({p + "attention.value.bias", l.value_bias});
    out.push_back({p + "attention.output.weight", l.output_weight});
    out.push_back({p + "attention.output.bias", l.output_bias});
    out.push_back({p + "attention.norm.gain", l.attention_norm_gain});
    out.push_back({p + "attention.norm.bias", l.attention_norm_bias});
    out.push_back({p + "ffn.in.weight", l.ffn_in_weight});
    out.push_back({p + "ffn.in.bias", l.ffn_in_bias});
    out.push_back({p + "ffn.out.weight", l.ffn_out_weight});
    out.push_back({p + "ffn.out.bias", l.ffn_out_bias});
    out.push_back({p + "ffn.norm.gain", l.ffn_norm_gain});
    out.push_back({p + "ffn.norm.bias", l.ffn_norm_bias});
  }
  return out;
}

template <typename T>
EncoderParams<T> EncoderParams<T>::clone() const {
  EncoderParams out;
  out.token_embedding = token_embedding.clone();
  out.position_embedding = position_embedding.clone();
  for (const auto& l : layers) {
    out.layers.push_back({l.query_weight.clone(), l.query_bias.clone(), l.key_weight.clone(), l.key_bias.clone(),
                          l.value_weight.clone(), l.value_bias.clone(), l.output_weight.clone(),
                          l.output_bias.clone(), l.attention_norm_gain.clone(), l.attention_norm_bias.clone(),
                          l.ffn_in_weight.clone(), l.ffn_in_bias.clone(), l.ffn_out_weight.clone(),
                          l.ffn_out_bias.clone(), l.ffn_norm_gain.clone(), l.ffn_norm_bias.clone()});
  }
  return out;
}

namespace {

template <typename T>
Tensor<T> truncated_normal(Shape shape, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<T> values(numel(shape));
  for (auto& v : values) {
    double z;
    do z = normal(rng);
    while (std::abs(z) > 2.0);
    v = static_cast<T>(0.02 * z);
  }
  return Tensor<T>(std::move(shape), std::move(values), true);
}

}  // namespace

template <typename T>
EncoderParams<T> init_encoder(const EncoderConfig& config, Rng& rng) {
  config.validate();
  const std::size_t d = config.hidden_dim, f = config.ffn_dim;
  EncoderParams<T> p;
  p.token_embedding = truncated_normal<T>({config.vocab_size, d}, rng);
  p.position_embedding = truncated_normal<T>({config.max_len, d}, rng);
  for (std::size_t i = 0; i < config.num_layers; ++i) {
    EncoderLayerParams<T> l;
    l.query_weight = truncated_normal<T>({d, d}, rng);
    l.query_bias = Tensor<T>::zeros({d}, true);
    l.key_weight = truncated_normal<T>({d, d}, rng);
    l.key_bias = Tensor<T>::zeros({d}, true);
    l.value_weight = truncated_normal<T>({d, d}, rng);
    l.value_bias = Tensor<T>::zeros({d}, true);
    l.output_weight = truncated_normal<T>({d, d}, rng);
    l.output_bias = Tensor<T>::zeros({d}, true);
    l.attention_norm_gain = Tensor<T>::full({d}, T(1), true);
    l.attention_norm_bias = Tensor<T>::zeros({d}, true);
    l.ffn_in_weight = truncated_normal<T>({d, f}, rng);
    l.ffn_in_bias = Tensor<T>::zeros({f}, true);
    l.ffn_out_weight = truncated_normal<T>({f, d}, rng);
    l.ffn_out_bias = Tensor<T>::zeros({d}, true);
    l.ffn_norm_gain = Tensor<T>::full({d}, T(1), true);
    l.ffn_norm_bias = Tensor<T>::zeros({d}, true);
    p.layers.push_back(std::move(l));
  }
  return p;
}

template <typename T>
EncoderParams<T> init_encoder(const EncoderConfig& config) {
  Rng rng(config.seed);
  return init_encoder<T>(config, rng);
}

template <typename T>
Tensor<T> multi_head_self_attention(const Tensor<T>& x, const std::vector<std::uint8_t>& mask,
                                    const EncoderLayerParams<T>& layer, std::size_t num_heads,
                                    std::vector<T>* attention_weights) {
  if (x.rank() != 3) throw DimensionError("attention input must be [B,T,d], got " + shape_string(x.shape()));
  if (mask.size() != x.dim(0) * x.dim(1)) {
    throw DimensionError("attention mask of length " + std::to_string(mask.size()) + " does not match input " +
                         shape_string(x.shape()));
  }
  const std::size_t head_dim = x.dim(2) / num_heads;
  auto q = ops::split_heads(ops::linear(x, layer.query_weight, layer.query_bias), num_heads);
  auto k = ops::split_heads(ops::linear(x, layer.key_weight, layer.key_bias), num_heads);
  auto v = ops::split_heads(ops::linear(x, layer.value_weight, layer.value_bias), num_heads);
  auto scores = ops::bmm(q, k, /*transpose_b=*/true);
  auto probs = ops::masked_softmax(scores, mask, num_heads, T(1) / std::sqrt(static_cast<T>(head_dim)));
  if (attention_weights) attention_weights->assign(probs.data().begin(), probs.data().end());
  auto context = ops::merge_heads(ops::bmm(probs, v), num_heads);
  return ops::linear(context, layer.output_weight, layer.output_bias);
}

template <typename T>
Tensor<T> encoder_block(const Tensor<T>& x, const std::vector<std::uint8_t>& mask,
                        const EncoderLayerParams<T>& layer, const EncoderConfig& config, bool training,
                        Rng& rng) {
  auto attended = multi_head_self_attention(x, mask, layer, config.num_heads);
  attended = ops::dropout(attended, config.dropout_p, training, rng);
  auto h = ops::layer_norm(ops::add(x, attended), layer.attention_norm_gain, layer.attention_norm_bias);
  auto ffn = ops::linear(ops::gelu(ops::linear(h, layer.ffn_in_weight, layer.ffn_in_bias)), layer.ffn_out_weight,
                         layer.ffn_out_bias);
  ffn = ops::dropout(ffn, config.dropout_p, training, rng);
  return ops::layer_norm(ops::add(h, ffn), layer.ffn_norm_gain, layer.ffn_norm_bias);
}

template <typename T>
Tensor<T> encode_sequence(const EncoderParams<T>& params, const EncoderConfig& config, const BatchInput& input,
                          bool training, Rng& rng) {
  const std::size_t B = input.batch_size, L = input.seq_len;
  if (B == 0 || L == 0) throw EncodingError("empty encoder batch");
  if (input.token_ids.size() != B * L || input.mask.size() != B * L) {
    throw DimensionError("encoder batch ids/mask lengths do not match " + std::to_string(B) + "x" +
                         std::to_string(L));
  }
  if (L > config.max_len) {
    throw EncodingError("sequence length " + std::to_string(L) + " exceeds max_len " +
                        std::to_string(config.max_len));
  }
  std::vector<std::int32_t> positions(B * L);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < L; ++t) positions[b * L + t] = static_cast<std::int32_t>(t);
  auto x = ops::add(ops::embedding(params.token_embedding, input.token_ids),
                    ops::embedding(params.position_embedding, positions));
  x = ops::dropout(ops::reshape(x, {B, L, config.hidden_dim}), config.dropout_p, training, rng);
  for (const auto& layer : params.layers) x = encoder_block(x, input.mask, layer, config, training, rng);
  return x;
}

template <typename T>
Tensor<T> pool_cls(const Tensor<T>& hidden) {
  return ops::select_position(hidden, 0);
}

#define MTLF_INSTANTIATE_ENCODER(T)                                                                         \
  template struct EncoderParams<T>;                                                                         \
  template EncoderParams<T> init_encoder<T>(const EncoderConfig&, Rng&);                                    \
  template EncoderParams<T> init_encoder<T>(const EncoderConfig&);                                          \
  template Tensor<T> multi_head_self_attention(const Tensor<T>&, const std::vector<std::uint8_t>&,          \
                                               const EncoderLayerParams<T>&, std::size_t, std::vector<T>*); \
  template Tensor<T> encoder_block(const Tensor<T>&, const std::vector<std::uint8_t>&,                      \
                                   const EncoderLayerParams<T>&, const EncoderConfig&, bool, Rng&);         \
  template Tensor<T> encode_sequence(const EncoderParams<T>&, const EncoderConfig&, const BatchInput&, bool, \
                                     Rng&);                                                                 \
  template Tensor<T> pool_cls(const Tensor<T>&);

MTLF_INSTANTIATE_ENCODER(float)
MTLF_INSTANTIATE_ENCODER(double)

#undef MTLF_INSTANTIATE_ENCODER

}  // namespace mtlf
