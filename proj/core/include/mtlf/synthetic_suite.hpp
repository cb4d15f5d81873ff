// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mtlf/grid.hpp"
#include "mtlf/synthetic.hpp"

namespace mtlf {

struct SyntheticTaskPlan {
  std::string name;
  TaskKind kind = TaskKind::single_classification;
  Domain domain = Domain::in_domain;
  std::size_t size = 0;
  double signal_strength = 0.8;
};

struct SyntheticSuiteOptions {
  std::uint64_t seed = 0;
  std::size_t lexicon_size = 200;
  std::size_t max_len = 32;
  SyntheticTaskPlan target{"bias", TaskKind::single_classification, Domain::in_domain, 200, 0.8};
  std::vector<SyntheticTaskPlan> auxiliaries;  // empty: the standard six
};

/// subj, imdb, reddit, wiki (in-domain) and sts, snli (cross-domain) with
/// the task kinds of the corpora they stand in for.
std::vector<SyntheticTaskPlan> standard_auxiliary_plans(std::size_t size, double signal_strength = 0.8);

/// Task names in grid order.
inline const std::vector<std::string> kInDomainTasks{"subj", "imdb", "reddit", "wiki"};
inline const std::vector<std::string> kCrossDomainTasks{"sts", "snli"};

/// Every task drawn over one shared lexicon, one vocabulary built from all
/// texts, and every dataset encoded at max_len.
struct SyntheticSuite {
  Vocab vocab;
  std::string target;
  std::map<std::string, DatasetManifest> manifests;
  std::map<std::string, std::vector<RawExample>> raw;
  std::map<std::string, GridDataset> datasets;
};

SyntheticSuite make_synthetic_suite(const SyntheticSuiteOptions& options);

}  // namespace mtlf
