// SPDX-License-Identifier: Apache-2.0
// Small synthetic datasets shared by the unit and acceptance tests.
#pragma once

#include <string>
#include <vector>

#include "mtlf/model.hpp"
#include "mtlf/synthetic.hpp"

namespace mtlf::fixture {

struct EncodedTask {
  TaskSpec spec;
  Vocab vocab;
  std::vector<EncodedExample> data;
};

inline TaskSpec binary_target(const std::string& name = "bias") {
  TaskSpec s;
  s.name = name;
  s.labels = {"negative", "positive"};
  return s;
}

inline EncodedTask synthetic_task(const std::string& name, TaskKind kind, std::size_t n, double signal,
                                  std::uint64_t seed, std::size_t max_len = 16) {
  Rng rng(seed);
  const auto corpus = make_synthetic_corpus(kind, n, 200, signal, rng);
  EncodedTask t;
  t.spec = TaskSpec::from_manifest(synthetic_manifest(name, kind, Domain::in_domain));
  t.vocab = build_vocab(corpus_texts(corpus.examples));
  for (const auto& ex : corpus.examples) t.data.push_back(encode_example(t.vocab, ex, max_len));
  return t;
}

inline EncoderConfig desk(std::size_t vocab_size, std::uint64_t seed, std::size_t max_len = 16) {
  auto c = EncoderConfig::desk_profile(vocab_size);
  c.max_len = max_len;
  c.seed = seed;
  return c;
}

inline std::vector<std::vector<float>> snapshot(const std::vector<NamedParameter<float>>& params) {
  std::vector<std::vector<float>> out;
  for (const auto& p : params) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

}  // namespace mtlf::fixture
