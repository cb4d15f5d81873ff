// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <string_view>

#include "mtlf/grid.hpp"

namespace mtlf::cli {

inline constexpr std::array<std::string_view, 6> kReportColumns{"macro F1", "micro F1",  "binary F1",
                                                                 "Precision", "Recall", "CE Loss"};

/// Markdown table, rows in results order, values at 3 decimals. The best
/// value of each column is bold (lowest for CE Loss); ties are all bold.
std::string render_markdown(const GridResults& results);

std::string render_csv(const GridResults& results);

}  // namespace mtlf::cli
