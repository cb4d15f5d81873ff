// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "fixtures.hpp"
#include "mtlf/engine.hpp"
#include "mtlf/synthetic_suite.hpp"

namespace mtlf {
namespace {

using fixture::binary_target;
using fixture::desk;
using fixture::snapshot;

std::vector<EncodedExample> dummy_data(std::size_t n, TaskKind kind) {
  std::vector<EncodedExample> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i].token_ids = {2, 4, 3};
    d[i].attention_mask = {1, 1, 1};
    if (is_classification(kind)) d[i].label = std::size_t{i % 2};
    else d[i].label = 0.5;
  }
  return d;
}

TaskSpec spec_for(const std::string& name, TaskKind kind) {
  return TaskSpec::from_manifest(synthetic_manifest(name, kind, Domain::in_domain));
}

TrainConfig config(std::uint64_t seed = 1) {
  TrainConfig c;
  c.seed = seed;
  c.learning_rate = 1e-3;
  return c;
}

TEST(TrainConfigTest, DefaultsAndValidation) {
  const TrainConfig c;
  EXPECT_EQ(c.batch_size, 32u);
  EXPECT_DOUBLE_EQ(c.learning_rate, 5e-5);
  EXPECT_EQ(c.max_epochs, 4u);
  EXPECT_EQ(c.patience, 1u);
  EXPECT_EQ(c.min_delta, 0.0);
  EXPECT_EQ(c.mtl_epochs, 1u);
  EXPECT_DOUBLE_EQ(c.weight_decay, 0.01);
  EXPECT_EQ(c.max_grad_norm, 0.0);
  auto bad = c;
  bad.validation_fraction = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(RegisterTaskTest, InDomainQuadrupleThenCrossDomainPair) {
  SharedModel<float> model(desk(10, 1));
  MtlEngine engine(model, config());
  const std::vector<std::pair<std::string, TaskKind>> four{{"subj", TaskKind::single_classification},
                                                           {"imdb", TaskKind::single_classification},
                                                           {"reddit", TaskKind::single_regression},
                                                           {"wiki", TaskKind::single_classification}};
  for (const auto& [name, kind] : four) engine.register_task(spec_for(name, kind), dummy_data(4, kind));
  EXPECT_EQ(engine.tasks().size(), 4u);
  EXPECT_EQ(model.head_count(), 4u);
  EXPECT_THROW(engine.register_task(spec_for("subj", TaskKind::single_classification),
                                    dummy_data(4, TaskKind::single_classification)),
               RegistryError);
  engine.register_task(spec_for("sts", TaskKind::pair_regression), dummy_data(4, TaskKind::pair_regression));
  engine.register_task(spec_for("snli", TaskKind::pair_classification), dummy_data(4, TaskKind::pair_classification));
  EXPECT_EQ(model.head_count(), 6u);
  EXPECT_EQ(model.head("snli").weight.dim(1), 3u);
}

TEST(RegisterTaskTest, EmptyOrMislabeledDataIsRejected) {
  SharedModel<float> model(desk(10, 1));
  MtlEngine engine(model, config());
  EXPECT_THROW(engine.register_task(spec_for("subj", TaskKind::single_classification), {}), DataError);
  EXPECT_THROW(engine.register_task(spec_for("reddit", TaskKind::single_regression),
                                    dummy_data(3, TaskKind::single_classification)),
               ContractError);
  EXPECT_EQ(model.head_count(), 0u);
}

TEST(ScheduleTest, CeilingArithmeticOnLargeTasks) {
  SharedModel<float> model(desk(10, 1));
  MtlEngine engine(model, config());
  engine.register_task(spec_for("wiki", TaskKind::single_classification),
                       dummy_data(50000, TaskKind::single_classification));
  engine.register_task(spec_for("reddit", TaskKind::single_regression), dummy_data(10000, TaskKind::single_regression));
  EXPECT_EQ(engine.build_epoch_schedule(0).batches.size(), 1563u + 313u);
}

TEST(ScheduleTest, SingleTaskOf64GivesTwoFullBatches) {
  SharedModel<float> model(desk(10, 1));
  MtlEngine engine(model, config());
  engine.register_task(spec_for("subj", TaskKind::single_classification),
                       dummy_data(64, TaskKind::single_classification));
  const auto s = engine.build_epoch_schedule(0);
  ASSERT_EQ(s.batches.size(), 2u);
  std::vector<std::size_t> all;
  for (const auto& b : s.batches) {
    EXPECT_EQ(b.rows.size(), 32u);
    all.insert(all.end(), b.rows.begin(), b.rows.end());
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> want(64);
  std::iota(want.begin(), want.end(), 0);
  EXPECT_EQ(all, want);
}

TEST(ScheduleTest, DeterministicPerSeedAndEpoch) {
  SharedModel<float> model(desk(10, 1));
  MtlEngine engine(model, config(9));
  for (int t = 0; t < 5; ++t)
    engine.register_task(spec_for("t" + std::to_string(t), TaskKind::single_classification),
                         dummy_data(100 + 37 * t, TaskKind::single_classification));
  auto flat = [](const EpochSchedule& s) {
    std::vector<std::size_t> out;
    for (const auto& b : s.batches) {
      out.push_back(1000000 + b.task);
      out.insert(out.end(), b.rows.begin(), b.rows.end());
    }
    return out;
  };
  EXPECT_EQ(flat(engine.build_epoch_schedule(0)), flat(engine.build_epoch_schedule(0)));
  EXPECT_NE(flat(engine.build_epoch_schedule(0)), flat(engine.build_epoch_schedule(1)));

  SharedModel<float> other_model(desk(10, 1));
  MtlEngine other(other_model, config(10));
  for (const auto& t : engine.tasks()) other.register_task(t.spec, t.data);
  EXPECT_NE(flat(engine.build_epoch_schedule(0)), flat(other.build_epoch_schedule(0)));
}

TEST(ScheduleTest, RandomConfigurationsArePartitionsIntoHomogeneousBatches) {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    SharedModel<float> model(desk(10, 1));
    auto cfg = config(rng());
    cfg.batch_size = 1 + rng() % 40;
    MtlEngine engine(model, cfg);
    const std::size_t tasks = 1 + rng() % 6;
    std::size_t expected_batches = 0;
    for (std::size_t t = 0; t < tasks; ++t) {
      const auto kind = static_cast<TaskKind>(rng() % 4);
      auto data = dummy_data(1 + rng() % 300, kind);
      Rng cap_rng(rng());
      data = cap_dataset(std::move(data), 1 + rng() % 250, cap_rng);
      expected_batches += (data.size() + cfg.batch_size - 1) / cfg.batch_size;
      engine.register_task(spec_for("task" + std::to_string(t), kind), std::move(data));
    }
    const auto s = engine.build_epoch_schedule(rng() % 5);
    ASSERT_EQ(s.batches.size(), expected_batches);
    std::vector<std::vector<std::size_t>> seen(tasks);
    for (const auto& b : s.batches) {
      ASSERT_LT(b.task, tasks);
      ASSERT_FALSE(b.rows.empty());
      ASSERT_LE(b.rows.size(), cfg.batch_size);
      seen[b.task].insert(seen[b.task].end(), b.rows.begin(), b.rows.end());
    }
    for (std::size_t t = 0; t < tasks; ++t) {
      std::sort(seen[t].begin(), seen[t].end());
      std::vector<std::size_t> want(engine.tasks()[t].data.size());
      std::iota(want.begin(), want.end(), 0);
      ASSERT_EQ(seen[t], want) << "trial " << trial << " task " << t;
    }
  }
}

TEST(TrainStepTest, OverfitsEightExamplesInTwoHundredSteps) {
  const auto task = fixture::synthetic_task("bias", TaskKind::single_classification, 8, 0.8, 5);
  SharedModel<float> model(desk(task.vocab.size(), 3));
  Rng rng(1);
  model.attach_head(task.spec, rng);
  auto cfg = config();
  AdamW<float> opt(model.all_parameters(), cfg.adamw());
  const auto batch = make_batch(task.data, task.spec.kind);
  float loss = 0;
  for (int i = 0; i < 200; ++i) loss = train_step(model, opt, task.spec.name, batch);
  EXPECT_LT(loss, 0.05f);
  EXPECT_LT(evaluation_loss(model, task.spec.name, task.data), 0.05);
}

TEST(TrainStepTest, ZeroLearningRateLeavesParametersBitIdentical) {
  const auto task = fixture::synthetic_task("bias", TaskKind::single_classification, 8, 0.8, 5);
  SharedModel<float> model(desk(task.vocab.size(), 3));
  Rng rng(1);
  model.attach_head(task.spec, rng);
  auto adam = config().adamw();
  adam.learning_rate = 0.0;
  AdamW<float> opt(model.all_parameters(), adam);
  const auto before = snapshot(model.all_parameters());
  const auto batch = make_batch(task.data, task.spec.kind);
  for (int i = 0; i < 3; ++i) train_step(model, opt, task.spec.name, batch);
  EXPECT_EQ(snapshot(model.all_parameters()), before);
}

TEST(TrainStepTest, ReturnsThePreUpdateLoss) {
  const auto task = fixture::synthetic_task("bias", TaskKind::single_classification, 8, 0.8, 5);
  SharedModel<float> model(desk(task.vocab.size(), 3));
  model.attach_head(task.spec, model.dropout_rng());
  auto cfg = model.config();
  cfg.dropout_p = 0.0;
  SharedModel<float> no_dropout(cfg, model.encoder().clone());
  no_dropout.attach_head(task.spec, TaskHead<float>{model.head("bias").weight.clone(), model.head("bias").bias.clone()});
  const auto batch = make_batch(task.data, task.spec.kind);
  const double expected = evaluation_loss(no_dropout, "bias", task.data);
  AdamW<float> opt(no_dropout.all_parameters(), config().adamw());
  EXPECT_NEAR(train_step(no_dropout, opt, "bias", batch), expected, 1e-6);
}

SyntheticSuite three_task_suite(std::uint64_t seed, double signal, std::size_t size) {
  SyntheticSuiteOptions o;
  o.seed = seed;
  o.max_len = 16;
  o.target.size = 64;
  o.auxiliaries = {{"subj", TaskKind::single_classification, Domain::in_domain, size, signal},
                   {"reddit", TaskKind::single_regression, Domain::in_domain, size, signal},
                   {"snli", TaskKind::pair_classification, Domain::cross_domain, size, signal}};
  return make_synthetic_suite(o);
}

TEST(MtlPhaseTest, EveryTaskLossTrendsDownOverOneEpoch) {
  const auto suite = three_task_suite(4, 0.9, 640);
  SharedModel<float> model(desk(suite.vocab.size(), 4));
  MtlEngine engine(model, config(4));
  for (const auto& name : {"subj", "reddit", "snli"}) {
    const auto& ds = suite.datasets.at(name);
    engine.register_task(ds.spec, ds.data);
  }
  const auto result = engine.run_mtl_phase();
  EXPECT_EQ(result.steps, 60u);
  for (const auto& [name, losses] : result.task_losses) {
    ASSERT_EQ(losses.size(), 20u) << name;
    const std::size_t q = losses.size() / 4;
    const double first = std::accumulate(losses.begin(), losses.begin() + q, 0.0) / q;
    const double last = std::accumulate(losses.end() - q, losses.end(), 0.0) / q;
    EXPECT_LT(last, first) << name;
  }
}

TEST(MtlPhaseTest, ZeroEpochsLeaveTheModelAtInitialization) {
  const auto suite = three_task_suite(4, 0.9, 64);
  SharedModel<float> model(desk(suite.vocab.size(), 4));
  auto cfg = config(4);
  cfg.mtl_epochs = 0;
  MtlEngine engine(model, cfg);
  engine.register_task(suite.datasets.at("subj").spec, suite.datasets.at("subj").data);
  const auto before = snapshot(model.all_parameters());
  const auto result = engine.run_mtl_phase();
  EXPECT_EQ(result.steps, 0u);
  EXPECT_EQ(snapshot(model.all_parameters()), before);
}

TEST(MtlPhaseTest, TwoRunsProduceBitIdenticalLossTraces) {
  const auto suite = three_task_suite(6, 0.8, 96);
  auto run = [&] {
    SharedModel<float> model(desk(suite.vocab.size(), 6));
    MtlEngine engine(model, config(6));
    for (const auto& name : {"subj", "reddit", "snli"})
      engine.register_task(suite.datasets.at(name).spec, suite.datasets.at(name).data);
    std::ostringstream log_text;
    TrainingLog log(&log_text);
    engine.run_mtl_phase(&log);
    return log_text.str();
  };
  const auto a = run();
  EXPECT_EQ(a, run());
  EXPECT_NE(a.find("\"phase\":\"mtl\""), std::string::npos);
}

TEST(EarlyStopTest, RuleExamples) {
  EarlyStopState s;
  s = early_stop_check(s, 0.5, 2, 0.0);
  s = early_stop_check(s, 0.5, 2, 0.0);
  EXPECT_EQ(s.epochs_without_improvement, 1u);
  EXPECT_FALSE(s.stopped);

  EarlyStopState p1;
  p1 = early_stop_check(p1, 0.5, 1, 0.0);
  p1 = early_stop_check(p1, 0.6, 1, 0.0);
  p1 = early_stop_check(p1, 0.7, 1, 0.0);
  EXPECT_TRUE(p1.stopped);
  EXPECT_EQ(p1.best_epoch, 1u);

  EarlyStopState d;
  d = early_stop_check(d, 0.500, 5, 0.01);
  d = early_stop_check(d, 0.495, 5, 0.01);
  EXPECT_EQ(d.epochs_without_improvement, 1u);
  EXPECT_DOUBLE_EQ(d.best_loss, 0.5);

  EXPECT_THROW(early_stop_check({}, std::nan(""), 1, 0.0), NumericError);
}

TEST(EarlyStopTest, PatienceOneStopsOnTheFirstNonImprovingEpoch) {
  EarlyStopState s;
  for (double v : {0.60, 0.50}) s = early_stop_check(s, v, 1, 0.0);
  EXPECT_FALSE(s.stopped);
  s = early_stop_check(s, 0.55, 1, 0.0);
  EXPECT_TRUE(s.stopped);
  EXPECT_EQ(s.best_epoch, 2u);
  EXPECT_EQ(s.epochs_seen, 3u);
}

TEST(SplitTest, SeventeenHundredGivesOneHundredSeventyStratified) {
  std::vector<EncodedExample> data(1700);
  for (std::size_t i = 0; i < data.size(); ++i) data[i].label = std::size_t{i < 1100 ? 0u : 1u};
  Rng rng(1);
  const auto split = stratified_split(data, 2, 0.1, rng);
  EXPECT_EQ(split.validation.size(), 170u);
  EXPECT_EQ(split.train.size(), 1530u);
  const auto positives = std::count_if(split.validation.begin(), split.validation.end(), [](auto i) { return i >= 1100; });
  EXPECT_EQ(positives, 60);
  std::vector<std::size_t> all = split.train;
  all.insert(all.end(), split.validation.begin(), split.validation.end());
  std::sort(all.begin(), all.end());
  EXPECT_TRUE(std::adjacent_find(all.begin(), all.end()) == all.end());
  EXPECT_EQ(all.size(), 1700u);
}

class FinetuneTest : public ::testing::Test {
 protected:
  FinetuneTest() : task_(fixture::synthetic_task("bias", TaskKind::single_classification, 96, 0.8, 11)) {}

  SharedModel<float> fresh_model() { return SharedModel<float>(desk(task_.vocab.size(), 2)); }

  fixture::EncodedTask task_;
};

TEST_F(FinetuneTest, ScriptedTraceStopsAfterEpochThreeAndRestoresEpochTwo) {
  auto model = fresh_model();
  const std::vector<double> trace{0.60, 0.50, 0.55, 0.40};
  std::vector<std::vector<std::vector<float>>> per_epoch;
  std::vector<double> probe_losses;
  FinetuneOptions options;
  options.validation_override = [&](SharedModel<float>& m, std::size_t epoch) {
    probe_losses.push_back(evaluation_loss(m, "bias", task_.data));
    return trace.at(epoch - 1);
  };
  options.on_epoch_end = [&](const SharedModel<float>& m, std::size_t) { per_epoch.push_back(snapshot(m.all_parameters())); };
  const auto result = run_target_finetune(model, binary_target(), task_.data, config(), options);
  EXPECT_EQ(result.epochs_run, 3u);
  EXPECT_EQ(result.best_epoch, 2u);
  EXPECT_EQ(result.validation_trace, (std::vector<double>{0.60, 0.50, 0.55}));
  EXPECT_DOUBLE_EQ(result.best_validation_loss, 0.50);
  ASSERT_EQ(per_epoch.size(), 3u);
  EXPECT_EQ(snapshot(model.all_parameters()), per_epoch[1]);
  EXPECT_NE(per_epoch[1], per_epoch[2]);
  EXPECT_EQ(evaluation_loss(model, "bias", task_.data), probe_losses[1]);
}

TEST_F(FinetuneTest, StrictlyDecreasingTraceRunsAllEpochs) {
  auto model = fresh_model();
  FinetuneOptions options;
  options.validation_override = [](SharedModel<float>&, std::size_t epoch) { return 1.0 / static_cast<double>(epoch); };
  const auto result = run_target_finetune(model, binary_target(), task_.data, config(), options);
  EXPECT_EQ(result.epochs_run, 4u);
  EXPECT_EQ(result.best_epoch, 4u);
}

TEST_F(FinetuneTest, RestoredModelHasTheRecordedBestValidationLoss) {
  auto model = fresh_model();
  auto cfg = config(7);
  cfg.max_epochs = 6;
  const auto result = run_target_finetune(model, binary_target(), task_.data, cfg);
  Rng split_rng(derive_seed(cfg.seed, "validation-split"));
  const auto split = stratified_split(task_.data, 2, cfg.validation_fraction, split_rng);
  std::vector<EncodedExample> validation;
  for (auto i : split.validation) validation.push_back(task_.data[i]);
  EXPECT_EQ(result.validation_size, validation.size());
  EXPECT_EQ(evaluation_loss(model, "bias", validation), result.best_validation_loss);
  for (double v : result.validation_trace) EXPECT_GE(v, result.best_validation_loss);
}

TEST_F(FinetuneTest, TooLittleDataIsADataErrorAndTargetMustBeBinary) {
  auto model = fresh_model();
  const std::span<const EncodedExample> few(task_.data.data(), 20);
  EXPECT_THROW(run_target_finetune(model, binary_target(), few, config()), DataError);
  auto three = binary_target("three");
  three.labels.push_back("other");
  EXPECT_THROW(run_target_finetune(model, three, task_.data, config()), ContractError);
}

TEST_F(FinetuneTest, LogRecordsStepsAndEpochs) {
  auto model = fresh_model();
  std::ostringstream out;
  TrainingLog log(&out);
  FinetuneOptions options;
  options.log = &log;
  auto cfg = config();
  cfg.max_epochs = 1;
  run_target_finetune(model, binary_target(), task_.data, cfg, options);
  const auto text = out.str();
  EXPECT_NE(text.find("{\"phase\":\"target\",\"epoch\":1,\"step\":1,\"task\":\"bias\",\"loss\":"), std::string::npos);
  EXPECT_NE(text.find("{\"epoch\":1,\"validation_ce\":"), std::string::npos);
}

// Label-free auxiliary training must not cost the target its ability to fit.
TEST(TrainabilityTest, NoiseAuxiliaryPhaseKeepsTargetTrainable) {
  const auto suite = three_task_suite(12, 0.0, 256);
  const auto& target = suite.datasets.at("bias");
  auto cfg = config(12);
  cfg.max_epochs = 60;
  cfg.patience = 1000;
  auto train_ce = [&](bool with_aux) {
    SharedModel<float> model(desk(suite.vocab.size(), 12));
    if (with_aux) {
      MtlEngine engine(model, cfg);
      for (const auto& name : {"subj", "reddit", "snli"})
        engine.register_task(suite.datasets.at(name).spec, suite.datasets.at(name).data);
      engine.run_mtl_phase();
    }
    run_target_finetune(model, target.spec, target.data, cfg);
    Rng split_rng(derive_seed(cfg.seed, "validation-split"));
    const auto split = stratified_split(target.data, 2, cfg.validation_fraction, split_rng);
    std::vector<EncodedExample> train;
    for (auto i : split.train) train.push_back(target.data[i]);
    return evaluation_loss(model, target.spec.name, train);
  };
  const double baseline = train_ce(false);
  const double after_mtl = train_ce(true);
  EXPECT_NEAR(after_mtl, baseline, 0.05);
}

}  // namespace
}  // namespace mtlf
