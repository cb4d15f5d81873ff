// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mtlf/cli/commands.hpp"
#include "mtlf/cli/config.hpp"
#include "mtlf/cli/report.hpp"

namespace mtlf::cli {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("mtlf_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Small synthetic suite on disk with a config trimmed for test speed.
  fs::path make_suite(std::size_t target = 40, std::size_t aux = 24) {
    const auto root = dir_ / "suite";
    const auto r = run({"synth", root.string(), "--seed", "4", "--target-size", std::to_string(target), "--aux-size",
                        std::to_string(aux)});
    EXPECT_EQ(r.code, kExitOk) << r.err;
    auto cfg = nlohmann::ordered_json::parse(slurp(root / "config.json"));
    cfg["encoder"]["hidden_dim"] = 16;
    cfg["encoder"]["ffn_dim"] = 32;
    cfg["train"]["max_epochs"] = 1;
    cfg["train"]["batch_size"] = 8;
    cfg["folds"] = 2;
    spit(root / "config.json", cfg.dump(2));
    return root;
  }

  nlohmann::ordered_json config_doc(const fs::path& root) const {
    return nlohmann::ordered_json::parse(slurp(root / "config.json"));
  }

  fs::path dir_;
};

TEST_F(CliTest, SynthWritesManifestsAndALoadableConfig) {
  const auto root = make_suite();
  for (const auto* name : {"bias", "subj", "imdb", "reddit", "wiki", "sts", "snli"}) {
    EXPECT_TRUE(fs::exists(root / (std::string(name) + ".manifest.json"))) << name;
    EXPECT_TRUE(fs::exists(root / (std::string(name) + ".jsonl"))) << name;
  }
  const auto cfg = load_experiment_config(root / "config.json");
  EXPECT_EQ(cfg.target.name, "bias");
  ASSERT_EQ(cfg.auxiliaries.size(), 6u);
  EXPECT_EQ(cfg.auxiliaries[0].name, "subj");
  EXPECT_EQ(cfg.auxiliaries[5].name, "snli");
  EXPECT_EQ(cfg.folds, 2u);
  EXPECT_EQ(cfg.train.max_epochs, 1u);
  EXPECT_DOUBLE_EQ(cfg.train.learning_rate, 1e-3);
  EXPECT_EQ(cfg.seed, 4u);
  EXPECT_EQ(cfg.output_dir, root / "out");

  const auto data = load_experiment_data(cfg);
  EXPECT_EQ(data.in_domain, (std::vector<std::string>{"subj", "imdb", "reddit", "wiki"}));
  EXPECT_EQ(data.cross_domain, (std::vector<std::string>{"sts", "snli"}));
  EXPECT_EQ(data.encoder.hidden_dim, 16u);
  EXPECT_EQ(data.encoder.vocab_size, data.vocab.size());
  EXPECT_EQ(data.datasets.at("bias").data.size(), 40u);
}

TEST_F(CliTest, ConfigErrorsFailFast) {
  const auto root = make_suite();
  auto expect_config_error = [&](nlohmann::ordered_json doc, const std::string& why) {
    EXPECT_THROW(parse_experiment_config(doc.dump(), root), ConfigError) << why;
  };
  auto doc = config_doc(root);
  EXPECT_NO_THROW(parse_experiment_config(doc.dump(), root));

  auto d = doc;
  d["target"] = "missing.manifest.json";
  expect_config_error(d, "missing target manifest");
  d = doc;
  d["auxiliaries"].push_back("nowhere.manifest.json");
  expect_config_error(d, "missing auxiliary manifest");
  d = doc;
  d["target"] = "sts.manifest.json";
  expect_config_error(d, "non-binary target");
  d = doc;
  d["auxiliaries"].push_back("subj.manifest.json");
  expect_config_error(d, "duplicate auxiliary");
  d = doc;
  d["auxiliaries"].push_back("bias.manifest.json");
  expect_config_error(d, "auxiliary equal to target");
  d = doc;
  d["train"]["warmup"] = 3;
  expect_config_error(d, "unknown train key");
  d = doc;
  d["train"]["learning_rate"] = -1;
  expect_config_error(d, "negative learning rate");
  d = doc;
  d["encoder"]["profile"] = "laptop";
  expect_config_error(d, "unknown profile");
  d = doc;
  d["encoder"]["num_heads"] = 3;
  expect_config_error(d, "heads do not divide width");
  d = doc;
  d["folds"] = 1;
  expect_config_error(d, "one fold");
  d = doc;
  d["schema_version"] = 7;
  expect_config_error(d, "schema version");
  d = doc;
  d["vocab"] = "absent.json";
  expect_config_error(d, "missing vocab");
  EXPECT_THROW(parse_experiment_config("{not json", root), ConfigError);
  EXPECT_THROW(parse_experiment_config("[]", root), ConfigError);
  EXPECT_THROW(load_experiment_config(root / "none.json"), ConfigError);

  fs::remove(root / "wiki.jsonl");
  EXPECT_THROW(parse_experiment_config(doc.dump(), root), ConfigError);
}

TEST(ResolveSeedTest, FlagBeatsEnvironmentBeatsConfig) {
  EXPECT_EQ(resolve_seed(7, "9", 3), 7u);
  EXPECT_EQ(resolve_seed(std::nullopt, "9", 3), 9u);
  EXPECT_EQ(resolve_seed(std::nullopt, nullptr, 3), 3u);
  EXPECT_EQ(resolve_seed(std::nullopt, "", 3), 3u);
  EXPECT_THROW(resolve_seed(std::nullopt, "12abc", 3), ConfigError);
  EXPECT_THROW(resolve_seed(std::nullopt, "-4", 3), ConfigError);
  EXPECT_EQ(resolve_seed(5, "garbage", 3), 5u);
}

GridRow row(const std::string& id, double macro, double micro, double binary, double p, double r, double ce) {
  GridRow g;
  g.entry.run_id = id;
  if (id != "B1") g.entry.auxiliary_tasks = {"imdb", "wiki"};
  g.report.macro_f1 = macro;
  g.report.micro_f1 = micro;
  g.report.binary_f1 = binary;
  g.report.precision = p;
  g.report.recall = r;
  g.report.ce_loss = ce;
  g.report.n = 10;
  return g;
}

TEST(ReportTest, ColumnsInOrderAndBestValuesBold) {
  GridResults res;
  res.rows = {row("B1", 0.5, 0.6, 0.7, 0.8, 0.9, 0.40), row("M4", 0.6, 0.6001, 0.2, 0.1, 0.95, 0.30),
              row("M10", 0.1, 0.2, 0.3, 0.4, 0.5, 0.35)};
  const auto md = render_markdown(res);
  std::istringstream lines(md);
  std::string header, rule, b1, m4, m10;
  std::getline(lines, header);
  std::getline(lines, rule);
  std::getline(lines, b1);
  std::getline(lines, m4);
  std::getline(lines, m10);
  EXPECT_EQ(header, "| Run | Auxiliary tasks | macro F1 | micro F1 | binary F1 | Precision | Recall | CE Loss |");
  EXPECT_EQ(b1, "| B1 | - | 0.500 | **0.600** | **0.700** | **0.800** | 0.900 | 0.400 |");
  // 0.6001 prints as 0.600, so micro F1 ties with B1; lowest CE wins.
  EXPECT_EQ(m4, "| M4 | imdb, wiki | **0.600** | **0.600** | 0.200 | 0.100 | **0.950** | **0.300** |");
  EXPECT_EQ(m10, "| M10 | imdb, wiki | 0.100 | 0.200 | 0.300 | 0.400 | 0.500 | 0.350 |");
}

TEST(ReportTest, SingleRowIsBoldEverywhereAndCsvKeepsFullPrecision) {
  GridResults res;
  res.rows = {row("B1", 0.125, 0.25, 0.5, 1.0, 0.0625, 0.1)};
  const auto md = render_markdown(res);
  EXPECT_NE(md.find("| B1 | - | **0.125** | **0.250** | **0.500** | **1.000** | **0.062** | **0.100** |"),
            std::string::npos)
      << md;
  EXPECT_EQ(render_csv(res),
            "run,mode,auxiliary_tasks,macro_f1,micro_f1,binary_f1,precision,recall,ce_loss,n\n"
            "B1,none,\"\",0.125,0.25,0.5,1,0.0625,0.10000000000000001,10\n");
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"train"}).code, kExitUsage);  // --config is required
  EXPECT_EQ(run({"train", "--config", (dir_ / "none.json").string()}).code, kExitUsage);
  EXPECT_EQ(run({"grid"}).code, kExitUsage);
  EXPECT_EQ(run({"report", (dir_ / "none.json").string()}).code, kExitUsage);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
  const auto v = run({"--version"});
  EXPECT_EQ(v.code, kExitOk);
  EXPECT_NE(v.out.find("0.1.0"), std::string::npos);
}

TEST_F(CliTest, UnknownTaskNamesListTheKnownOnes) {
  const auto root = make_suite();
  const auto r = run({"train", "--config", (root / "config.json").string(), "--mode", "mtl", "--tasks", "subj,yelp"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("yelp"), std::string::npos);
  EXPECT_NE(r.err.find("subj,imdb,reddit,wiki,sts,snli"), std::string::npos) << r.err;
  EXPECT_EQ(run({"train", "--config", (root / "config.json").string(), "--mode", "tl", "--tasks", "subj,imdb"}).code,
            kExitUsage);
  EXPECT_EQ(run({"train", "--config", (root / "config.json").string(), "--mode", "none", "--tasks", "subj"}).code,
            kExitUsage);
  EXPECT_EQ(run({"grid", "--config", (root / "config.json").string(), "--only", "M11"}).code, kExitUsage);
}

TEST_F(CliTest, BuildVocabMergesSourcesAndIsByteStable) {
  const auto root = make_suite();
  const auto a = dir_ / "a.json", b = dir_ / "b.json", small = dir_ / "small.json";
  const std::vector<std::string> manifests{(root / "bias.manifest.json").string(), (root / "snli.manifest.json").string()};
  auto args = std::vector<std::string>{"build-vocab"};
  args.insert(args.end(), manifests.begin(), manifests.end());
  auto with_out = [&](const fs::path& p) {
    auto v = args;
    v.insert(v.end(), {"--out", p.string()});
    return v;
  };
  const auto r = run(with_out(a));
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("sources=2 texts=88"), std::string::npos) << r.out;  // 40 single + 24 pairs
  ASSERT_EQ(run(with_out(b)).code, kExitOk);
  EXPECT_EQ(slurp(a), slurp(b));

  auto capped = with_out(small);
  capped.insert(capped.end(), {"--max-size", "20"});
  ASSERT_EQ(run(capped).code, kExitOk);
  EXPECT_EQ(Vocab::from_json(slurp(small)).size(), 20u);
  EXPECT_GT(Vocab::from_json(slurp(a)).size(), 20u);
}

TEST_F(CliTest, TrainWritesCheckpointAndLog) {
  const auto root = make_suite();
  const auto out_dir = dir_ / "train_out";
  const auto r = run({"train", "--config", (root / "config.json").string(), "--mode", "mtl", "--tasks", "subj,sts",
                      "--out", out_dir.string(), "--seed", "11"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("mode=mtl tasks=subj,sts auxiliary_steps=6 epochs=1 best_epoch=1"), std::string::npos)
      << r.out;
  EXPECT_TRUE(fs::exists(out_dir / "checkpoint" / "manifest.json"));
  std::ifstream log(out_dir / "train.log.jsonl");
  std::size_t mtl_lines = 0, validation_lines = 0;
  for (std::string line; std::getline(log, line);) {
    const auto j = nlohmann::json::parse(line);
    if (j.contains("validation_ce")) ++validation_lines;
    else if (j.at("phase") == "mtl") ++mtl_lines;
  }
  EXPECT_EQ(mtl_lines, 6u);
  EXPECT_EQ(validation_lines, 1u);
}

TEST_F(CliTest, CrossValidationAndReportRoundTrip) {
  const auto root = make_suite();
  const auto out_dir = dir_ / "cv_out";
  const auto r = run({"cv", "--config", (root / "config.json").string(), "--mode", "tl", "--tasks", "wiki", "--folds",
                      "3", "--out", out_dir.string(), "--parallel", "2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("folds=3"), std::string::npos);
  const auto results = results_from_json(nlohmann::ordered_json::parse(slurp(out_dir / "results.json")));
  ASSERT_EQ(results.rows.size(), 1u);
  EXPECT_EQ(results.rows[0].entry.mode, GridMode::transfer);
  EXPECT_EQ(results.rows[0].report.folds.size(), 3u);

  const auto md = dir_ / "r.md", csv = dir_ / "r.csv";
  const auto rep = run({"report", (out_dir / "results.json").string(), "--out", md.string(), "--csv", csv.string()});
  ASSERT_EQ(rep.code, kExitOk) << rep.err;
  EXPECT_EQ(slurp(md), render_markdown(results));
  EXPECT_EQ(slurp(csv), render_csv(results));
  const auto to_stdout = run({"report", (out_dir / "results.json").string()});
  EXPECT_EQ(to_stdout.out, render_markdown(results));

  auto doc = nlohmann::ordered_json::parse(slurp(out_dir / "results.json"));
  doc["schema_version"] = 2;
  spit(dir_ / "bad.json", doc.dump());
  EXPECT_EQ(run({"report", (dir_ / "bad.json").string()}).code, kExitUsage);
  spit(dir_ / "broken.json", "{");
  EXPECT_EQ(run({"report", (dir_ / "broken.json").string()}).code, kExitUsage);
}

TEST_F(CliTest, GridOnlyRunsTheSelectedCells) {
  const auto root = make_suite();
  const auto out_dir = dir_ / "grid_out";
  const auto r =
      run({"grid", "--config", (root / "config.json").string(), "--only", "B1,M4", "--out", out_dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("runs=2"), std::string::npos);
  const auto results = results_from_json(nlohmann::ordered_json::parse(slurp(out_dir / "results.json")));
  ASSERT_EQ(results.rows.size(), 2u);
  EXPECT_EQ(results.rows[1].entry.auxiliary_tasks, (std::vector<std::string>{"imdb", "reddit", "wiki"}));
  EXPECT_TRUE(fs::exists(out_dir / "report.md"));
  EXPECT_TRUE(fs::exists(out_dir / "report.csv"));
  EXPECT_EQ(run({"grid", "--synthetic", "--config", (root / "config.json").string()}).code, kExitUsage);
}

TEST_F(CliTest, SyntheticGridIsReproducible) {
  const std::vector<std::string> base{"grid",         "--synthetic", "--target-size", "60", "--aux-size",
                                      "16",           "--only",      "B1,B5,M10",     "--seed", "9"};
  auto a = base, b = base;
  a.insert(a.end(), {"--out", (dir_ / "a").string()});
  b.insert(b.end(), {"--out", (dir_ / "b").string(), "--parallel", "2"});
  ASSERT_EQ(run(a).code, kExitOk);
  ASSERT_EQ(run(b).code, kExitOk);
  EXPECT_EQ(slurp(dir_ / "a" / "results.json"), slurp(dir_ / "b" / "results.json"));
}

}  // namespace
}  // namespace mtlf::cli
