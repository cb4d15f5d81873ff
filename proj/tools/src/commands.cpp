// SPDX-License-Identifier: Apache-2.0
#include "mtlf/cli/commands.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "mtlf/checkpoint.hpp"
#include "mtlf/cli/config.hpp"
#include "mtlf/cli/report.hpp"
#include "mtlf/synthetic_suite.hpp"

namespace mtlf::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + file.string());
  out << text;
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

// Maps --mode/--tasks onto a grid entry, rejecting unknown task names.
GridEntry entry_for(const std::string& run_id, const std::string& mode, const std::vector<std::string>& tasks,
                    const ExperimentData& data) {
  std::vector<std::string> known = data.in_domain;
  known.insert(known.end(), data.cross_domain.begin(), data.cross_domain.end());
  for (const auto& t : tasks) {
    if (std::find(known.begin(), known.end(), t) == known.end())
      throw ConfigError("unknown task '" + t + "' (known: " + (known.empty() ? "none" : join(known)) + ")");
  }
  if (std::set<std::string>(tasks.begin(), tasks.end()).size() != tasks.size())
    throw ConfigError("--tasks lists a task twice");
  GridEntry e{run_id, GridMode::none, tasks};
  if (mode == "none") {
    if (!tasks.empty()) throw ConfigError("--mode none takes no --tasks");
  } else if (mode == "tl") {
    if (tasks.size() != 1) throw ConfigError("--mode tl needs exactly one task");
    e.mode = GridMode::transfer;
  } else if (mode == "mtl") {
    if (tasks.empty()) throw ConfigError("--mode mtl needs at least one task");
    const bool cross = std::any_of(tasks.begin(), tasks.end(), [&](const std::string& t) {
      return std::find(data.cross_domain.begin(), data.cross_domain.end(), t) != data.cross_domain.end();
    });
    e.mode = cross ? GridMode::mtl_cross_domain : GridMode::mtl_in_domain;
  } else {
    throw ConfigError("--mode must be none, tl or mtl");
  }
  return e;
}

struct RunOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::size_t parallel = 1;
};

ExperimentConfig load_for_run(const RunOptions& o) {
  auto cfg = load_experiment_config(o.config);
  cfg.seed = resolve_seed(o.seed, std::getenv("MTLF_SEED"), cfg.seed);
  if (!o.out_dir.empty()) cfg.output_dir = o.out_dir;
  return cfg;
}

void write_results(const GridResults& results, const fs::path& dir, bool with_report) {
  write_text(dir / "results.json", results_to_json(results).dump(2) + "\n");
  if (with_report) {
    write_text(dir / "report.md", render_markdown(results));
    write_text(dir / "report.csv", render_csv(results));
  }
}

int cmd_build_vocab(const std::vector<std::string>& manifests, const std::string& out_file, std::size_t min_freq,
                    std::size_t max_size, std::ostream& out) {
  std::vector<std::string> texts;
  for (const auto& path : manifests) {
    const auto m = load_manifest(path);
    for (auto& t : corpus_texts(load_dataset(m))) texts.push_back(std::move(t));
  }
  const auto vocab = build_vocab(texts, min_freq, max_size);
  write_text(out_file, vocab.to_json() + "\n");
  out << "sources=" << manifests.size() << " texts=" << texts.size() << " vocab_size=" << vocab.size() << '\n';
  return kExitOk;
}

int cmd_train(const RunOptions& o, const std::string& mode, const std::string& tasks, std::ostream& out) {
  const auto cfg = load_for_run(o);
  const auto data = load_experiment_data(cfg);
  const auto entry = entry_for("train", mode, split_list(tasks), data);

  fs::create_directories(cfg.output_dir);
  std::ofstream log_file(cfg.output_dir / "train.log.jsonl", std::ios::binary);
  TrainingLog log(&log_file);

  SharedModel<float> model(data.encoder);
  std::size_t aux_steps = 0;
  if (!entry.auxiliary_tasks.empty()) {
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, entry.run_id);
    MtlEngine engine(model, tc);
    for (const auto& name : entry.auxiliary_tasks) {
      const auto& ds = data.datasets.at(name);
      engine.register_task(ds.spec, ds.data);
    }
    aux_steps = engine.run_mtl_phase(&log).steps;
  }
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  const auto& target = data.datasets.at(data.target);
  FinetuneOptions fo;
  fo.log = &log;
  const auto result = run_target_finetune(model, target.spec, target.data, tc, fo);
  save_checkpoint(model, cfg.output_dir / "checkpoint");

  std::ostringstream ce;
  ce.precision(6);
  ce << std::fixed << result.best_validation_loss;
  out << "mode=" << mode << " tasks=" << (entry.auxiliary_tasks.empty() ? "-" : join(entry.auxiliary_tasks))
      << " auxiliary_steps=" << aux_steps << " epochs=" << result.epochs_run << " best_epoch=" << result.best_epoch
      << " best_validation_ce=" << ce.str() << " checkpoint=" << (cfg.output_dir / "checkpoint").string() << '\n';
  return kExitOk;
}

GridConfig grid_config(const ExperimentConfig& cfg, const ExperimentData& data, std::size_t parallel) {
  GridConfig g;
  g.encoder = data.encoder;
  g.train = cfg.train;
  g.folds = cfg.folds;
  g.stratified = cfg.stratified;
  g.aux_per_fold = cfg.aux_per_fold;
  g.parallelism = parallel;
  g.seed = cfg.seed;
  return g;
}

int cmd_cv(const RunOptions& o, const std::string& mode, const std::string& tasks, std::optional<std::size_t> folds,
           std::ostream& out) {
  auto cfg = load_for_run(o);
  if (folds) cfg.folds = *folds;
  if (cfg.folds < 2) throw ConfigError("--folds must be at least 2");
  const auto data = load_experiment_data(cfg);
  const std::vector<GridEntry> grid{entry_for("CV", mode, split_list(tasks), data)};
  auto g = grid_config(cfg, data, 1);
  g.fold_parallelism = o.parallel;
  const auto results = run_grid(grid, data.datasets, data.target, g);
  write_results(results, cfg.output_dir, false);
  out << "folds=" << cfg.folds << " macro_f1=" << results.rows[0].report.macro_f1
      << " results=" << (cfg.output_dir / "results.json").string() << '\n';
  return kExitOk;
}

struct SyntheticRunOptions {
  bool enabled = false;
  std::string profile = "desk";
  std::size_t target_size = 100;
  std::size_t aux_size = 300;
  std::size_t lexicon_size = 200;
  double learning_rate = 1e-3;
};

SyntheticSuiteOptions suite_options(const SyntheticRunOptions& s, std::uint64_t seed) {
  SyntheticSuiteOptions so;
  so.seed = seed;
  so.lexicon_size = s.lexicon_size;
  so.target.size = s.target_size;
  so.auxiliaries = standard_auxiliary_plans(s.aux_size);
  return so;
}

std::vector<GridEntry> select_runs(std::vector<GridEntry> grid, const std::string& only) {
  if (only.empty()) return grid;
  std::vector<GridEntry> picked;
  for (const auto& id : split_list(only)) {
    auto it = std::find_if(grid.begin(), grid.end(), [&](const GridEntry& e) { return e.run_id == id; });
    if (it == grid.end()) throw ConfigError("unknown run id '" + id + "' (expected B1-B5 or M1-M10)");
    picked.push_back(*it);
  }
  return picked;
}

int cmd_grid(const RunOptions& o, const SyntheticRunOptions& synth, const std::string& only, std::ostream& out,
             std::ostream& err) {
  std::map<std::string, GridDataset> datasets;
  std::string target;
  std::vector<std::string> in_domain, cross_domain;
  GridConfig g;
  fs::path out_dir;
  if (synth.enabled) {
    if (!o.config.empty()) throw ConfigError("--synthetic and --config are mutually exclusive");
    const auto seed = resolve_seed(o.seed, std::getenv("MTLF_SEED"), 0);
    auto suite = make_synthetic_suite(suite_options(synth, seed));
    g.encoder = EncoderConfig::profile(synth.profile, suite.vocab.size());
    g.encoder.max_len = SyntheticSuiteOptions{}.max_len;
    g.train.learning_rate = synth.learning_rate;
    g.seed = seed;
    g.parallelism = o.parallel;
    datasets = std::move(suite.datasets);
    target = suite.target;
    in_domain = kInDomainTasks;
    cross_domain = kCrossDomainTasks;
    out_dir = o.out_dir.empty() ? fs::path("mtlf_out") : fs::path(o.out_dir);
  } else {
    if (o.config.empty()) throw ConfigError("grid needs --config or --synthetic");
    const auto cfg = load_for_run(o);
    auto data = load_experiment_data(cfg);
    g = grid_config(cfg, data, o.parallel);
    datasets = std::move(data.datasets);
    target = data.target;
    in_domain = data.in_domain;
    cross_domain = data.cross_domain;
    out_dir = cfg.output_dir;
  }
  const auto grid = select_runs(build_experiment_grid(in_domain, cross_domain), only);
  const auto results = run_grid(grid, datasets, target, g, [&](const GridRow& row) {
    err << row.entry.run_id << " macro_f1=" << row.report.macro_f1 << '\n';
  });
  write_results(results, out_dir, true);
  out << "runs=" << results.rows.size() << " results=" << (out_dir / "results.json").string() << '\n';
  return kExitOk;
}

int cmd_report(const std::string& results_file, const std::string& md_file, const std::string& csv_file,
               std::ostream& out) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(read_text(results_file));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("results file is not valid JSON: ") + e.what());
  }
  const auto results = results_from_json(doc);
  const auto md = render_markdown(results);
  if (md_file.empty()) out << md;
  else write_text(md_file, md);
  if (!csv_file.empty()) write_text(csv_file, render_csv(results));
  return kExitOk;
}

int cmd_synth(const SyntheticRunOptions& synth, std::optional<std::uint64_t> seed_flag, const std::string& dir,
              std::ostream& out) {
  const auto seed = resolve_seed(seed_flag, std::getenv("MTLF_SEED"), 0);
  const auto suite = make_synthetic_suite(suite_options(synth, seed));
  const fs::path root(dir);
  fs::create_directories(root);
  std::vector<std::string> aux_files;
  for (const auto& [name, manifest] : suite.manifests) {
    auto m = manifest;
    m.path = root / (name + ".jsonl");
    std::ostringstream rows;
    write_dataset(m, suite.raw.at(name), rows);
    write_text(m.path, rows.str());
    write_text(root / (name + ".manifest.json"), manifest_to_json(m, root) + "\n");
  }
  for (const auto& name : kInDomainTasks) aux_files.push_back(name + ".manifest.json");
  for (const auto& name : kCrossDomainTasks) aux_files.push_back(name + ".manifest.json");

  ExperimentConfig cfg;
  cfg.profile = synth.profile;
  cfg.encoder_overrides = {{"max_len", SyntheticSuiteOptions{}.max_len}};
  cfg.train.learning_rate = synth.learning_rate;
  cfg.seed = seed;
  cfg.output_dir = root / "out";
  auto doc = experiment_config_to_json(cfg, root);
  doc["target"] = suite.target + ".manifest.json";
  doc["auxiliaries"] = aux_files;
  write_text(root / "config.json", doc.dump(2) + "\n");
  out << "tasks=" << suite.manifests.size() << " config=" << (root / "config.json").string() << '\n';
  return kExitOk;
}

void add_run_options(CLI::App* cmd, RunOptions& o, bool config_required) {
  auto* c = cmd->add_option("--config", o.config, "Experiment config JSON");
  if (config_required) c->required();
  cmd->add_option("--seed", o.seed, "Master seed (overrides MTLF_SEED and the config)");
  cmd->add_option("--out", o.out_dir, "Output directory (overrides the config)");
  cmd->add_option("--parallel", o.parallel, "Worker threads")->check(CLI::PositiveNumber);
}

void add_synthetic_sizes(CLI::App* cmd, SyntheticRunOptions& s) {
  cmd->add_option("--profile", s.profile, "Encoder profile: desk or paper");
  cmd->add_option("--target-size", s.target_size, "Synthetic target examples")->check(CLI::PositiveNumber);
  cmd->add_option("--aux-size", s.aux_size, "Synthetic examples per auxiliary task")->check(CLI::PositiveNumber);
  cmd->add_option("--lexicon-size", s.lexicon_size, "Synthetic pseudo-word count")->check(CLI::Range(16, 1 << 20));
  cmd->add_option("--lr", s.learning_rate, "Learning rate for synthetic runs")->check(CLI::PositiveNumber);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multitask fine-tuning experiments for binary text classification", "mtlf"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mtlf 0.1.0");

  auto* vocab_cmd = app.add_subcommand("build-vocab", "Build a vocabulary from dataset manifests");
  std::vector<std::string> vocab_inputs;
  std::string vocab_out = "vocab.json";
  std::size_t min_freq = 1, max_size = 30000;
  vocab_cmd->add_option("manifests", vocab_inputs, "Dataset manifest files")->required();
  vocab_cmd->add_option("--out", vocab_out, "Vocabulary output file");
  vocab_cmd->add_option("--min-freq", min_freq, "Minimum token frequency")->check(CLI::PositiveNumber);
  vocab_cmd->add_option("--max-size", max_size, "Maximum entries including reserved tokens");

  RunOptions train_opts, cv_opts, grid_opts;
  std::string train_mode = "none", train_tasks, cv_mode = "none", cv_tasks, only;
  std::optional<std::size_t> cv_folds;

  auto* train_cmd = app.add_subcommand("train", "Auxiliary phase, then target fine-tuning on one split");
  add_run_options(train_cmd, train_opts, true);
  train_cmd->add_option("--mode", train_mode, "none, tl or mtl")->check(CLI::IsMember({"none", "tl", "mtl"}));
  train_cmd->add_option("--tasks", train_tasks, "Comma-separated auxiliary task names");

  auto* cv_cmd = app.add_subcommand("cv", "Cross-validate one configuration");
  add_run_options(cv_cmd, cv_opts, true);
  cv_cmd->add_option("--mode", cv_mode, "none, tl or mtl")->check(CLI::IsMember({"none", "tl", "mtl"}));
  cv_cmd->add_option("--tasks", cv_tasks, "Comma-separated auxiliary task names");
  cv_cmd->add_option("--folds", cv_folds, "Number of folds (default from config, 5)");

  auto* grid_cmd = app.add_subcommand("grid", "Run the B1-B5 / M1-M10 experiment grid");
  add_run_options(grid_cmd, grid_opts, false);
  SyntheticRunOptions grid_synth;
  grid_cmd->add_flag("--synthetic", grid_synth.enabled, "Generate all datasets instead of reading manifests");
  add_synthetic_sizes(grid_cmd, grid_synth);
  grid_cmd->add_option("--only", only, "Comma-separated run ids to execute");

  auto* report_cmd = app.add_subcommand("report", "Render results.json as a markdown table");
  std::string results_file, md_file, csv_file;
  report_cmd->add_option("results", results_file, "results.json")->required();
  report_cmd->add_option("--out", md_file, "Write markdown here instead of stdout");
  report_cmd->add_option("--csv", csv_file, "Also write a CSV");

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset suite and config to a directory");
  SyntheticRunOptions synth_opts;
  std::optional<std::uint64_t> synth_seed;
  std::string synth_dir;
  synth_cmd->add_option("dir", synth_dir, "Output directory")->required();
  synth_cmd->add_option("--seed", synth_seed, "Generator seed");
  add_synthetic_sizes(synth_cmd, synth_opts);

  std::vector<std::string> argv_storage{"mtlf"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*vocab_cmd) return cmd_build_vocab(vocab_inputs, vocab_out, min_freq, max_size, out);
    if (*train_cmd) return cmd_train(train_opts, train_mode, train_tasks, out);
    if (*cv_cmd) return cmd_cv(cv_opts, cv_mode, cv_tasks, cv_folds, out);
    if (*grid_cmd) return cmd_grid(grid_opts, grid_synth, only, out, err);
    if (*report_cmd) return cmd_report(results_file, md_file, csv_file, out);
    if (*synth_cmd) return cmd_synth(synth_opts, synth_seed, synth_dir, out);
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace mtlf::cli
