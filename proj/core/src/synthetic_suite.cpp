// SPDX-License-Identifier: Apache-2.0
#include "mtlf/synthetic_suite.hpp"

namespace mtlf {

std::vector<SyntheticTaskPlan> standard_auxiliary_plans(std::size_t size, double signal_strength) {
  return {
      {"subj", TaskKind::single_classification, Domain::in_domain, size, signal_strength},
      {"imdb", TaskKind::single_classification, Domain::in_domain, size, signal_strength},
      {"reddit", TaskKind::single_regression, Domain::in_domain, size, signal_strength},
      {"wiki", TaskKind::single_classification, Domain::in_domain, size, signal_strength},
      {"sts", TaskKind::pair_regression, Domain::cross_domain, size, signal_strength},
      {"snli", TaskKind::pair_classification, Domain::cross_domain, size, signal_strength},
  };
}

SyntheticSuite make_synthetic_suite(const SyntheticSuiteOptions& options) {
  Rng lexicon_rng(derive_seed(options.seed, "lexicon"));
  const auto lexicon = make_lexicon(options.lexicon_size, lexicon_rng);

  std::vector<SyntheticTaskPlan> plans{options.target};
  const auto aux = options.auxiliaries.empty() ? standard_auxiliary_plans(2000) : options.auxiliaries;
  plans.insert(plans.end(), aux.begin(), aux.end());

  SyntheticSuite suite;
  suite.target = options.target.name;
  std::vector<std::string> texts;
  for (const auto& plan : plans) {
    if (suite.raw.count(plan.name)) throw ParameterError("duplicate synthetic task '" + plan.name + "'");
    Rng rng(derive_seed(options.seed, "synthetic", plan.name));
    auto corpus = make_synthetic_corpus(plan.kind, plan.size, lexicon, plan.signal_strength, rng);
    auto manifest = synthetic_manifest(plan.name, plan.kind, plan.domain);
    manifest.path = plan.name + ".jsonl";
    for (auto& t : corpus_texts(corpus.examples)) texts.push_back(std::move(t));
    suite.manifests.emplace(plan.name, std::move(manifest));
    suite.raw.emplace(plan.name, std::move(corpus.examples));
  }
  suite.vocab = build_vocab(texts);

  for (const auto& [name, examples] : suite.raw) {
    GridDataset ds;
    ds.spec = TaskSpec::from_manifest(suite.manifests.at(name));
    ds.data.reserve(examples.size());
    for (const auto& ex : examples) ds.data.push_back(encode_example(suite.vocab, ex, options.max_len));
    suite.datasets.emplace(name, std::move(ds));
  }
  return suite;
}

}  // namespace mtlf
