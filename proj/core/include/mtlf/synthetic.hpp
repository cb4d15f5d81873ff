// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mtlf/random.hpp"
#include "mtlf/text.hpp"

namespace mtlf {

/// Word pools shared by every synthetic task. Class 1 ("positive") texts
/// draw indicative words from `positive`, class 0 texts from `negative`;
/// all other positions are filler.
struct SyntheticLexicon {
  std::vector<std::string> positive;
  std::vector<std::string> negative;
  std::vector<std::string> filler;
};

/// Splits `vocab_size` pseudo-words into positive/negative pools of
/// vocab_size / 8 each; the rest are filler. Requires vocab_size >= 16.
SyntheticLexicon make_lexicon(std::size_t vocab_size, Rng& rng);

struct SyntheticOptions {
  std::size_t min_words = 6;
  std::size_t max_words = 12;
  std::size_t min_indicative = 1;  // indicative words per polar sentence
  std::size_t max_indicative = 2;
  std::size_t regression_slots = 3;  // indicative words in regression texts
  double regression_noise = 0.05;
};

/// A generated corpus plus the parameters that produced it.
///
/// Classification labels are exactly balanced. With probability
/// `signal_strength` an example's text is generated from its label; otherwise
/// from an independently drawn class, so strength 0 makes labels independent
/// of the text. Pair classification uses three relations
/// (0 = same polarity, 1 = second side neutral, 2 = opposite polarity).
/// Regression targets are noisy functions of indicative-word density,
/// already normalized to [0, 1].
struct SyntheticCorpus {
  TaskKind kind = TaskKind::single_classification;
  double signal_strength = 0.0;
  std::size_t num_classes = 0;
  std::vector<RawExample> examples;
  std::vector<std::size_t> latent_classes;  // class the text was generated from
  SyntheticLexicon lexicon;
};

SyntheticCorpus make_synthetic_corpus(TaskKind kind, std::size_t n, const SyntheticLexicon& lexicon,
                                      double signal_strength, Rng& rng, const SyntheticOptions& options = {});

/// Convenience form drawing a fresh lexicon from `rng` first.
SyntheticCorpus make_synthetic_corpus(TaskKind kind, std::size_t n, std::size_t vocab_size,
                                      double signal_strength, Rng& rng);

/// Manifest matching synthetic output: binary labels {"negative","positive"},
/// pair labels {"entailment","neutral","contradiction"}, single regression on
/// [0,1], pair regression on [0,5].
DatasetManifest synthetic_manifest(std::string name, TaskKind kind, Domain domain);

}  // namespace mtlf
