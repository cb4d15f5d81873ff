// SPDX-License-Identifier: Apache-2.0
#include "mtlf/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mtlf {

namespace {

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

const std::string& pick(const std::vector<std::string>& pool, Rng& rng) {
  return pool[uniform_index(rng, pool.size())];
}

// `indicative` holds the pool for each indicative slot; slots land at
// distinct random positions among filler words.
std::string make_sentence(const SyntheticLexicon& lex, const std::vector<const std::vector<std::string>*>& indicative,
                          const SyntheticOptions& opt, Rng& rng) {
  const std::size_t length = std::max(
      indicative.size(), std::uniform_int_distribution<std::size_t>(opt.min_words, opt.max_words)(rng));
  std::vector<std::size_t> positions(length);
  std::iota(positions.begin(), positions.end(), 0);
  std::shuffle(positions.begin(), positions.end(), rng);
  std::vector<const std::string*> words(length, nullptr);
  for (std::size_t i = 0; i < indicative.size(); ++i) words[positions[i]] = &pick(*indicative[i], rng);
  std::string out;
  for (std::size_t i = 0; i < length; ++i) {
    if (i) out += ' ';
    out += words[i] ? *words[i] : pick(lex.filler, rng);
  }
  return out;
}

std::string polar_sentence(const SyntheticLexicon& lex, std::size_t polarity, const SyntheticOptions& opt, Rng& rng) {
  const std::size_t k = std::uniform_int_distribution<std::size_t>(opt.min_indicative, opt.max_indicative)(rng);
  const auto* pool = polarity == 1 ? &lex.positive : &lex.negative;
  return make_sentence(lex, std::vector<const std::vector<std::string>*>(k, pool), opt, rng);
}

// Sentence whose indicative slots are `positives` positive and the rest
// negative.
std::string mixed_sentence(const SyntheticLexicon& lex, std::size_t positives, const SyntheticOptions& opt, Rng& rng) {
  std::vector<const std::vector<std::string>*> pools;
  for (std::size_t i = 0; i < opt.regression_slots; ++i) pools.push_back(i < positives ? &lex.positive : &lex.negative);
  return make_sentence(lex, pools, opt, rng);
}

std::vector<std::size_t> balanced_labels(std::size_t n, std::size_t classes, Rng& rng) {
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % classes;
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

double noisy_target(double clean, double signal, double noise, Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double unrelated = uniform(rng);
  double v = signal * clean + (1.0 - signal) * unrelated;
  if (noise > 0.0) v += std::normal_distribution<double>(0.0, noise)(rng);
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace

SyntheticLexicon make_lexicon(std::size_t vocab_size, Rng& rng) {
  if (vocab_size < 16) throw ParameterError("synthetic lexicon needs at least 16 words");
  std::vector<std::string> words(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) words[i] = "w" + std::to_string(i);
  std::shuffle(words.begin(), words.end(), rng);
  const std::size_t pool = vocab_size / 8;
  SyntheticLexicon lex;
  lex.positive.assign(words.begin(), words.begin() + pool);
  lex.negative.assign(words.begin() + pool, words.begin() + 2 * pool);
  lex.filler.assign(words.begin() + 2 * pool, words.end());
  return lex;
}

SyntheticCorpus make_synthetic_corpus(TaskKind kind, std::size_t n, const SyntheticLexicon& lex,
                                      double signal_strength, Rng& rng, const SyntheticOptions& opt) {
  if (n < 2) throw ParameterError("synthetic corpus needs n >= 2");
  if (!(signal_strength >= 0.0 && signal_strength <= 1.0))
    throw ParameterError("signal_strength must lie in [0, 1]");
  if (opt.min_words > opt.max_words || opt.min_indicative > opt.max_indicative || opt.min_indicative == 0)
    throw ParameterError("invalid synthetic sentence options");
  if (lex.positive.empty() || lex.negative.empty() || lex.filler.empty())
    throw ParameterError("synthetic lexicon pools must be non-empty");

  SyntheticCorpus corpus;
  corpus.kind = kind;
  corpus.signal_strength = signal_strength;
  corpus.lexicon = lex;
  corpus.examples.reserve(n);
  std::bernoulli_distribution follows_label(signal_strength);

  switch (kind) {
    case TaskKind::single_classification: {
      corpus.num_classes = 2;
      for (auto label : balanced_labels(n, 2, rng)) {
        const std::size_t latent = follows_label(rng) ? label : uniform_index(rng, 2);
        corpus.examples.push_back({polar_sentence(lex, latent, opt, rng), std::nullopt, label});
        corpus.latent_classes.push_back(latent);
      }
      break;
    }
    case TaskKind::pair_classification: {
      corpus.num_classes = 3;
      for (auto label : balanced_labels(n, 3, rng)) {
        const std::size_t relation = follows_label(rng) ? label : uniform_index(rng, 3);
        const std::size_t polarity = uniform_index(rng, 2);
        std::string a = polar_sentence(lex, polarity, opt, rng);
        std::string b = relation == 0   ? polar_sentence(lex, polarity, opt, rng)
                        : relation == 2 ? polar_sentence(lex, 1 - polarity, opt, rng)
                                        : make_sentence(lex, {}, opt, rng);
        corpus.examples.push_back({std::move(a), std::move(b), label});
        corpus.latent_classes.push_back(relation);
      }
      break;
    }
    case TaskKind::single_regression: {
      const std::size_t slots = opt.regression_slots;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t positives = uniform_index(rng, slots + 1);
        std::string text = mixed_sentence(lex, positives, opt, rng);
        const double clean = static_cast<double>(positives) / static_cast<double>(slots);
        corpus.examples.push_back({std::move(text), std::nullopt, noisy_target(clean, signal_strength, opt.regression_noise, rng)});
        corpus.latent_classes.push_back(positives);
      }
      break;
    }
    case TaskKind::pair_regression: {
      const std::size_t slots = opt.regression_slots;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t pa = uniform_index(rng, slots + 1);
        const std::size_t pb = uniform_index(rng, slots + 1);
        std::string a = mixed_sentence(lex, pa, opt, rng);
        std::string b = mixed_sentence(lex, pb, opt, rng);
        const double gap = std::abs(static_cast<double>(pa) - static_cast<double>(pb));
        const double clean = 1.0 - gap / static_cast<double>(slots);
        corpus.examples.push_back({std::move(a), std::move(b), noisy_target(clean, signal_strength, opt.regression_noise, rng)});
        corpus.latent_classes.push_back(slots - static_cast<std::size_t>(gap));
      }
      break;
    }
  }
  return corpus;
}

SyntheticCorpus make_synthetic_corpus(TaskKind kind, std::size_t n, std::size_t vocab_size,
                                      double signal_strength, Rng& rng) {
  const auto lex = make_lexicon(vocab_size, rng);
  return make_synthetic_corpus(kind, n, lex, signal_strength, rng);
}

DatasetManifest synthetic_manifest(std::string name, TaskKind kind, Domain domain) {
  DatasetManifest m;
  m.name = std::move(name);
  m.task_kind = kind;
  m.domain = domain;
  switch (kind) {
    case TaskKind::single_classification: m.labels = {"negative", "positive"}; break;
    case TaskKind::pair_classification: m.labels = {"entailment", "neutral", "contradiction"}; break;
    case TaskKind::single_regression: m.range_lo = 0.0; m.range_hi = 1.0; break;
    case TaskKind::pair_regression: m.range_lo = 0.0; m.range_hi = 5.0; break;
  }
  return m;
}

}  // namespace mtlf
