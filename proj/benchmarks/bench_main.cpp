// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "mtlf/engine.hpp"
#include "mtlf/ops.hpp"
#include "mtlf/synthetic.hpp"

namespace {

using namespace mtlf;

Tensor<float> random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> v(rows * cols);
  for (auto& x : v) x = n(rng);
  return Tensor<float>({rows, cols}, std::move(v));
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const auto a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(ops::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

struct DeskSetup {
  TaskSpec spec;
  Vocab vocab;
  Batch batch;
};

DeskSetup desk_setup(std::size_t batch_size) {
  Rng rng(7);
  const auto corpus = make_synthetic_corpus(TaskKind::single_classification, batch_size, 200, 0.8, rng);
  DeskSetup s;
  s.spec = TaskSpec::from_manifest(synthetic_manifest("bias", TaskKind::single_classification, Domain::in_domain));
  s.vocab = build_vocab(corpus_texts(corpus.examples));
  std::vector<EncodedExample> data;
  for (const auto& ex : corpus.examples) data.push_back(encode_example(s.vocab, ex, 32));
  s.batch = make_batch(data, s.spec.kind);
  return s;
}

void BM_EncoderForward(benchmark::State& state) {
  const auto s = desk_setup(static_cast<std::size_t>(state.range(0)));
  SharedModel<float> model(EncoderConfig::desk_profile(s.vocab.size()));
  Rng rng(2);
  model.attach_head(s.spec, rng);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(forward_task(model, s.spec.name, s.batch, false));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncoderForward)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto s = desk_setup(static_cast<std::size_t>(state.range(0)));
  SharedModel<float> model(EncoderConfig::desk_profile(s.vocab.size()));
  Rng rng(2);
  model.attach_head(s.spec, rng);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  AdamW<float> opt(model.all_parameters(), cfg.adamw());
  for (auto _ : state) benchmark::DoNotOptimize(train_step(model, opt, s.spec.name, s.batch));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
