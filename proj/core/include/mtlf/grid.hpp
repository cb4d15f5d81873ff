// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtlf/cross_validation.hpp"

namespace mtlf {

enum class GridMode { none, transfer, mtl_in_domain, mtl_cross_domain };

std::string_view to_string(GridMode mode) noexcept;  // none, TL, MTL_in_domain, MTL_cross_domain
GridMode parse_grid_mode(std::string_view text);     // ParseError

struct GridEntry {
  std::string run_id;
  GridMode mode = GridMode::none;
  std::vector<std::string> auxiliary_tasks;

  bool operator==(const GridEntry&) const = default;
};

/// B1 (no auxiliary training), B2-B5 (one in-domain task each), M1-M4 (the
/// 3-subsets of the in-domain tasks, dropping the last, third, second and
/// first task in turn), M5 (all four), M6-M10 (M1-M5 plus both cross-domain
/// tasks). ParameterError unless given 4 and 2 distinct names.
std::vector<GridEntry> build_experiment_grid(std::span<const std::string> in_domain,
                                             std::span<const std::string> cross_domain);

struct GridDataset {
  TaskSpec spec;
  std::vector<EncodedExample> data;
};

struct GridConfig {
  EncoderConfig encoder;   // encoder.seed is replaced by `seed`
  TrainConfig train;       // shared by the auxiliary phase and the target
  std::size_t folds = 5;
  bool stratified = true;
  bool aux_per_fold = false;  // run the auxiliary phase inside every fold
  std::size_t parallelism = 1;       // grid cells in flight
  std::size_t fold_parallelism = 1;  // folds in flight within a cell
  std::uint64_t seed = 0;
};

struct GridRow {
  GridEntry entry;
  std::size_t auxiliary_steps = 0;  // per auxiliary phase
  MetricsReport report;
};

struct GridResults {
  std::string target;
  std::uint64_t seed = 0;
  std::vector<GridRow> rows;  // grid order
};

using GridProgress = std::function<void(const GridRow&)>;

/// Validates that every task named by the grid (and the target) has a
/// dataset before any training starts; ConfigError otherwise. Progress
/// callbacks are serialized but arrive in completion order.
GridResults run_grid(std::span<const GridEntry> grid, const std::map<std::string, GridDataset>& datasets,
                     const std::string& target, const GridConfig& config, const GridProgress& progress = {});

inline constexpr int kResultsSchemaVersion = 1;

nlohmann::ordered_json results_to_json(const GridResults& results);
GridResults results_from_json(const nlohmann::ordered_json& j);  // FormatError

}  // namespace mtlf
