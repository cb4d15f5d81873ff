// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "mtlf/metrics.hpp"
#include "oracles.hpp"

namespace mtlf {
namespace {

using Classes = std::vector<std::size_t>;

ConfusionCounts counts_from(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
  // Binary table with class 1 as the positive class.
  Classes pred, gold;
  auto add = [&](std::uint64_t n, std::size_t p, std::size_t g) {
    for (std::uint64_t i = 0; i < n; ++i) {
      pred.push_back(p);
      gold.push_back(g);
    }
  };
  add(tp, 1, 1);
  add(fp, 1, 0);
  add(fn, 0, 1);
  add(tn, 0, 0);
  return confusion_matrix(pred, gold, 2);
}

TEST(ConfusionTest, PerfectAndConstantPredictions) {
  const Classes y{0, 1, 2, 1, 0};
  const auto perfect = confusion_matrix(y, y, 3);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(perfect.fp[c], 0u);
    EXPECT_EQ(perfect.fn[c], 0u);
  }
  const Classes zeros(10, 0), half{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  const auto c = confusion_matrix(zeros, half, 2);
  EXPECT_EQ(c.tp[0], 5u);
  EXPECT_EQ(c.fp[0], 5u);
  EXPECT_EQ(c.tn[1], 5u);
  EXPECT_EQ(c.n, 10u);
}

TEST(ConfusionTest, ContractViolations) {
  EXPECT_THROW(confusion_matrix(Classes{0, 1}, Classes{0}, 2), ContractError);
  EXPECT_THROW(confusion_matrix(Classes{0, 2}, Classes{0, 1}, 2), ContractError);
}

TEST(ConfusionTest, RandomVectorsMatchNaiveDoubleLoop) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 500, k = 2 + rng() % 3;
    Classes p(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng() % k;
      g[i] = rng() % k;
    }
    const auto c = confusion_matrix(p, g, k);
    for (std::size_t cls = 0; cls < k; ++cls) {
      std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        tp += p[i] == cls && g[i] == cls;
        fp += p[i] == cls && g[i] != cls;
        fn += p[i] != cls && g[i] == cls;
        tn += p[i] != cls && g[i] != cls;
      }
      ASSERT_EQ(c.tp[cls], tp);
      ASSERT_EQ(c.fp[cls], fp);
      ASSERT_EQ(c.fn[cls], fn);
      ASSERT_EQ(c.tn[cls], tn);
    }
  }
}

TEST(BinaryPrfTest, FixedCountsDegenerateAndPerfect) {
  const auto r = binary_prf(counts_from(50, 10, 10, 30), 1);
  EXPECT_NEAR(r.precision, 5.0 / 6, 1e-15);
  EXPECT_NEAR(r.recall, 5.0 / 6, 1e-15);
  EXPECT_NEAR(r.f1, 5.0 / 6, 1e-15);
  const auto none = binary_prf(counts_from(0, 0, 4, 6), 1);
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f1, 0.0);
  const auto perfect = binary_prf(counts_from(7, 0, 0, 3), 1);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);
}

TEST(BinaryPrfTest, ReportedPrecisionRecallReproduceBinaryF1) {
  // Precision 0.805 and recall 0.640 exactly: TP 2576, FP 624, FN 1449.
  const auto r = binary_prf(counts_from(2576, 624, 1449, 3000), 1);
  EXPECT_NEAR(r.precision, 0.805, 1e-12);
  EXPECT_NEAR(r.recall, 0.640, 1e-12);
  EXPECT_NEAR(r.f1, 0.713, 0.003);
  EXPECT_NEAR(r.f1, 0.711, 0.003);
}

TEST(AggregateF1Test, MacroMeanMicroAccuracyAndPerfect) {
  // Class 1: TP 50, FP 10, FN 10 (F1 5/6). Class 0 F1 = 2*30/(60+10+10) = 0.75.
  const auto agg = aggregate_f1(counts_from(50, 10, 10, 30));
  EXPECT_NEAR(agg.macro_f1, (5.0 / 6 + 0.75) / 2, 1e-15);
  EXPECT_NEAR(agg.macro_f1, 0.7917, 1e-4);

  Classes pred(100), gold(100);
  for (std::size_t i = 0; i < 100; ++i) {
    gold[i] = i % 2;
    pred[i] = i < 80 ? gold[i] : 1 - gold[i];
  }
  EXPECT_EQ(aggregate_f1(confusion_matrix(pred, gold, 2)).micro_f1, 0.80);
  const auto perfect = aggregate_f1(confusion_matrix(gold, gold, 2));
  EXPECT_EQ(perfect.macro_f1, 1.0);
  EXPECT_EQ(perfect.micro_f1, 1.0);
}

TEST(ClassificationReportTest, MatchesBruteForceOracleOnRandomData) {
  Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 500, k = 2 + rng() % 3;
    Classes p(n), g(n);
    const bool skewed = trial % 3 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = rng() % k;
      p[i] = skewed ? (rng() % 4 == 0 ? rng() % k : g[i]) : rng() % k;
    }
    const auto r = classification_report(p, g, k);
    const auto o = oracle::brute_force_metrics(p, g, k);
    ASSERT_NEAR(r.macro_f1, o.macro_f1, 1e-12);
    ASSERT_NEAR(r.micro_f1, o.micro_f1, 1e-12);
    ASSERT_NEAR(r.binary_f1, o.binary_f1, 1e-12);
    ASSERT_NEAR(r.precision, o.precision, 1e-12);
    ASSERT_NEAR(r.recall, o.recall, 1e-12);
    ASSERT_EQ(r.micro_f1, o.accuracy);
    ASSERT_EQ(r.n, n);
  }
}

TEST(ClassificationReportTest, MacroF1InvariantUnderRelabeling) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    Classes p(n), g(n), ps(n), gs(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng() % 2;
      g[i] = rng() % 2;
      ps[i] = 1 - p[i];
      gs[i] = 1 - g[i];
    }
    EXPECT_NEAR(classification_report(p, g, 2).macro_f1, classification_report(ps, gs, 2).macro_f1, 1e-15);
  }
}

TEST(ArgmaxTest, TiesGoToLowestIndex) {
  const std::vector<float> logits{1, 1, 0, 3, 3, 2, -1, -1, -1};
  EXPECT_EQ(argmax_rows(logits, 3), (Classes{0, 0, 0}));
  EXPECT_EQ(argmax_rows(std::vector<float>{0.1f, 0.2f}, 2), (Classes{1}));
}

TEST(CrossEntropyMeanTest, UniformAndConfident) {
  EXPECT_NEAR(mean_cross_entropy(std::vector<float>{0, 0, 0, 0}, Classes{0, 1}, 2), std::log(2.0), 1e-12);
  EXPECT_NEAR(mean_cross_entropy(std::vector<float>{30, -30}, Classes{0}, 2), 0.0, 1e-12);
}

TEST(ReportFromDumpTest, ConfidentCorrectPredictionsArePerfect) {
  PredictionDump d;
  d.num_classes = 2;
  d.labels = {0, 1, 1, 0};
  for (auto y : d.labels) {
    d.logits.push_back(y == 0 ? 25.f : -25.f);
    d.logits.push_back(y == 1 ? 25.f : -25.f);
  }
  d.predictions = argmax_rows(d.logits, 2);
  const auto r = report_from_dump(d);
  EXPECT_EQ(r.macro_f1, 1.0);
  EXPECT_EQ(r.micro_f1, 1.0);
  EXPECT_EQ(r.binary_f1, 1.0);
  EXPECT_NEAR(r.ce_loss, 0.0, 1e-12);
}

class EvaluateModelTest : public ::testing::Test {
 protected:
  EvaluateModelTest() : task_(fixture::synthetic_task("bias", TaskKind::single_classification, 40, 0.8, 3)) {}
  fixture::EncodedTask task_;
};

TEST_F(EvaluateModelTest, ConstantLogitsOnBalancedDataGiveHalfAccuracyAndLn2) {
  SharedModel<float> model(fixture::desk(task_.vocab.size(), 1));
  model.attach_head(task_.spec, TaskHead<float>{Tensor<float>::zeros({64, 2}, true), Tensor<float>::zeros({2}, true)});
  const auto r = evaluate_model(model, "bias", task_.data);
  EXPECT_EQ(r.micro_f1, 0.5);
  EXPECT_EQ(r.binary_f1, 0.0);  // nothing is predicted positive
  EXPECT_NEAR(r.ce_loss, std::log(2.0), 1e-9);
  EXPECT_EQ(r.n, 40u);
}

TEST_F(EvaluateModelTest, AgreesWithOracleOnThePredictionDump) {
  SharedModel<float> model(fixture::desk(task_.vocab.size(), 8));
  Rng rng(2);
  model.attach_head(task_.spec, rng);
  // Random heads have tiny logits; scale so both classes get predicted.
  for (auto& v : model.head_parameters("bias")[0].tensor.mutable_data()) v *= 500.f;
  const auto dump = predict(model, "bias", task_.data, 7);
  ASSERT_EQ(dump.predictions.size(), 40u);
  const auto r = evaluate_model(model, "bias", task_.data, 7);
  const auto o = oracle::brute_force_metrics(dump.predictions, dump.labels, 2);
  EXPECT_NEAR(r.macro_f1, o.macro_f1, 1e-12);
  EXPECT_NEAR(r.binary_f1, o.binary_f1, 1e-12);
  EXPECT_NEAR(r.precision, o.precision, 1e-12);
  EXPECT_NEAR(r.recall, o.recall, 1e-12);
  EXPECT_EQ(r.micro_f1, o.accuracy);
  EXPECT_NEAR(r.ce_loss, mean_cross_entropy(dump.logits, dump.labels, 2), 1e-12);
  EXPECT_THROW(predict(model, "bias", {}, 7), DataError);
}

TEST(MeanReportTest, UnweightedMeanKeepsFolds) {
  MetricsReport a, b;
  a.macro_f1 = 0.5;
  a.ce_loss = 1.0;
  a.n = 10;
  b.macro_f1 = 0.7;
  b.ce_loss = 0.5;
  b.n = 30;
  const std::vector<MetricsReport> folds{a, b};
  const auto m = mean_report(folds);
  EXPECT_DOUBLE_EQ(m.macro_f1, 0.6);
  EXPECT_DOUBLE_EQ(m.ce_loss, 0.75);
  EXPECT_EQ(m.n, 40u);
  ASSERT_EQ(m.folds.size(), 2u);
  EXPECT_EQ(m.folds[1].n, 30u);
}

TEST(ReportJsonTest, RoundTripAndFormatErrors) {
  MetricsReport f;
  f.macro_f1 = 0.123456789012345;
  f.precision = 1.0 / 3;
  f.n = 5;
  const std::vector<MetricsReport> folds{f, f};
  const auto agg = mean_report(folds);
  const auto back = report_from_json(report_to_json(agg));
  EXPECT_EQ(back.macro_f1, agg.macro_f1);
  EXPECT_EQ(back.precision, agg.precision);
  EXPECT_EQ(back.folds.size(), 2u);
  EXPECT_THROW(report_from_json(nlohmann::ordered_json{{"macro_f1", 1}}), FormatError);
}

}  // namespace
}  // namespace mtlf
