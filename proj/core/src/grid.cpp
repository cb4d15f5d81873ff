// SPDX-License-Identifier: Apache-2.0
#include "mtlf/grid.hpp"

#include <algorithm>
#include <mutex>
#include <optional>
#include <set>

#include "mtlf/parallel.hpp"

namespace mtlf {

std::string_view to_string(GridMode mode) noexcept {
  switch (mode) {
    case GridMode::none: return "none";
    case GridMode::transfer: return "TL";
    case GridMode::mtl_in_domain: return "MTL_in_domain";
    case GridMode::mtl_cross_domain: return "MTL_cross_domain";
  }
  return "none";
}

GridMode parse_grid_mode(std::string_view text) {
  for (auto m : {GridMode::none, GridMode::transfer, GridMode::mtl_in_domain, GridMode::mtl_cross_domain})
    if (to_string(m) == text) return m;
  throw ParseError("unknown grid mode '" + std::string(text) + "'");
}

std::vector<GridEntry> build_experiment_grid(std::span<const std::string> in_domain,
                                             std::span<const std::string> cross_domain) {
  if (in_domain.size() != 4 || cross_domain.size() != 2) {
    throw ParameterError("grid needs 4 in-domain and 2 cross-domain tasks, got " + std::to_string(in_domain.size()) +
                         " and " + std::to_string(cross_domain.size()));
  }
  std::set<std::string> distinct(in_domain.begin(), in_domain.end());
  distinct.insert(cross_domain.begin(), cross_domain.end());
  if (distinct.size() != 6) throw ParameterError("grid task names must be distinct");

  std::vector<GridEntry> grid;
  grid.push_back({"B1", GridMode::none, {}});
  for (std::size_t i = 0; i < 4; ++i)
    grid.push_back({"B" + std::to_string(i + 2), GridMode::transfer, {in_domain[i]}});

  std::vector<std::vector<std::string>> sets;
  for (std::size_t drop = 4; drop-- > 0;) {
    std::vector<std::string> s;
    for (std::size_t i = 0; i < 4; ++i)
      if (i != drop) s.push_back(in_domain[i]);
    sets.push_back(std::move(s));
  }
  sets.emplace_back(in_domain.begin(), in_domain.end());

  for (std::size_t i = 0; i < sets.size(); ++i)
    grid.push_back({"M" + std::to_string(i + 1), GridMode::mtl_in_domain, sets[i]});
  for (std::size_t i = 0; i < sets.size(); ++i) {
    auto s = sets[i];
    s.insert(s.end(), cross_domain.begin(), cross_domain.end());
    grid.push_back({"M" + std::to_string(i + 6), GridMode::mtl_cross_domain, std::move(s)});
  }
  return grid;
}

namespace {

struct AuxiliaryOutcome {
  SharedModel<float> model;
  std::size_t steps = 0;
};

AuxiliaryOutcome auxiliary_phase(const GridEntry& entry, const std::map<std::string, GridDataset>& datasets,
                                 const GridConfig& config, std::uint64_t phase_seed) {
  EncoderConfig ec = config.encoder;
  ec.seed = config.seed;
  AuxiliaryOutcome out{SharedModel<float>(ec), 0};
  if (entry.auxiliary_tasks.empty()) return out;
  TrainConfig tc = config.train;
  tc.seed = phase_seed;
  MtlEngine engine(out.model, tc);
  for (const auto& name : entry.auxiliary_tasks) {
    const auto& ds = datasets.at(name);
    engine.register_task(ds.spec, ds.data);
  }
  out.steps = engine.run_mtl_phase().steps;
  return out;
}

}  // namespace

GridResults run_grid(std::span<const GridEntry> grid, const std::map<std::string, GridDataset>& datasets,
                     const std::string& target, const GridConfig& config, const GridProgress& progress) {
  auto require = [&](const std::string& name, const std::string& role) {
    if (!datasets.count(name)) throw ConfigError("no dataset registered for " + role + " task '" + name + "'");
  };
  require(target, "target");
  for (const auto& e : grid)
    for (const auto& t : e.auxiliary_tasks) require(t, e.run_id + " auxiliary");
  config.train.validate();
  config.encoder.validate();

  const auto& target_ds = datasets.at(target);
  CrossValidationConfig cv;
  cv.folds = config.folds;
  cv.stratified = config.stratified;
  cv.seed = config.seed;
  cv.train = config.train;
  cv.parallelism = config.fold_parallelism;
  std::mutex progress_mutex;

  GridResults results;
  results.target = target;
  results.seed = config.seed;
  results.rows.resize(grid.size());

  parallel_for(grid.size(), config.parallelism, [&](std::size_t i) {
    const GridEntry& entry = grid[i];
    GridRow& row = results.rows[i];
    row.entry = entry;
    ModelFactory factory;
    std::optional<AuxiliaryOutcome> shared;
    std::vector<std::size_t> fold_steps(config.folds, 0);
    if (config.aux_per_fold) {
      factory = [&](std::size_t fold) {
        auto o = auxiliary_phase(entry, datasets, config, derive_seed(config.seed, entry.run_id, "fold", fold));
        fold_steps[fold] = o.steps;
        return std::move(o.model);
      };
    } else {
      shared.emplace(auxiliary_phase(entry, datasets, config, derive_seed(config.seed, entry.run_id)));
      row.auxiliary_steps = shared->steps;
      factory = [&](std::size_t) { return shared->model.clone(); };
    }
    row.report = run_cross_validation(factory, target_ds.spec, target_ds.data, cv);
    if (config.aux_per_fold) row.auxiliary_steps = fold_steps.front();
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(row);
    }
  });
  return results;
}

nlohmann::ordered_json results_to_json(const GridResults& results) {
  nlohmann::ordered_json j;
  j["schema_version"] = kResultsSchemaVersion;
  j["target"] = results.target;
  j["seed"] = results.seed;
  j["runs"] = nlohmann::ordered_json::object();
  for (const auto& row : results.rows) {
    nlohmann::ordered_json r;
    r["mode"] = to_string(row.entry.mode);
    r["auxiliary_tasks"] = row.entry.auxiliary_tasks;
    r["auxiliary_steps"] = row.auxiliary_steps;
    auto report = report_to_json(row.report);
    auto folds = report.contains("folds") ? report["folds"] : nlohmann::ordered_json::array();
    report.erase("folds");
    r["aggregate"] = std::move(report);
    r["folds"] = std::move(folds);
    j["runs"][row.entry.run_id] = std::move(r);
  }
  return j;
}

GridResults results_from_json(const nlohmann::ordered_json& j) {
  try {
    if (!j.is_object() || !j.contains("schema_version"))
      throw FormatError("results document has no schema_version");
    const int version = j.at("schema_version").get<int>();
    if (version != kResultsSchemaVersion)
      throw FormatError("unsupported results schema_version " + std::to_string(version));
    GridResults out;
    out.target = j.at("target").get<std::string>();
    out.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [id, r] : j.at("runs").items()) {
      GridRow row;
      row.entry.run_id = id;
      row.entry.mode = parse_grid_mode(r.at("mode").get<std::string>());
      row.entry.auxiliary_tasks = r.at("auxiliary_tasks").get<std::vector<std::string>>();
      row.auxiliary_steps = r.at("auxiliary_steps").get<std::size_t>();
      row.report = report_from_json(r.at("aggregate"));
      for (const auto& f : r.at("folds")) row.report.folds.push_back(report_from_json(f));
      out.rows.push_back(std::move(row));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed results document: ") + e.what());
  } catch (const ParseError& e) {
    throw FormatError(std::string("malformed results document: ") + e.what());
  }
}

}  // namespace mtlf
