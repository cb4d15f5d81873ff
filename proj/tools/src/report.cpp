// SPDX-License-Identifier: Apache-2.0
#include "mtlf/cli/report.hpp"

#include <cstdio>
#include <sstream>
#include <vector>

namespace mtlf::cli {

namespace {

std::array<double, 6> columns(const MetricsReport& r) {
  return {r.macro_f1, r.micro_f1, r.binary_f1, r.precision, r.recall, r.ce_loss};
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace

std::string render_markdown(const GridResults& results) {
  // Best values are picked on the printed (rounded) text so that cells that
  // look equal are bolded together.
  std::vector<std::array<std::string, 6>> cells;
  std::array<double, 6> best{};
  for (std::size_t row = 0; row < results.rows.size(); ++row) {
    const auto values = columns(results.rows[row].report);
    std::array<std::string, 6> text;
    for (std::size_t c = 0; c < 6; ++c) {
      text[c] = fixed3(values[c]);
      const double shown = std::stod(text[c]);
      const bool lower_is_better = c == 5;
      if (row == 0 || (lower_is_better ? shown < best[c] : shown > best[c])) best[c] = shown;
    }
    cells.push_back(text);
  }

  std::ostringstream out;
  out << "| Run | Auxiliary tasks |";
  for (auto name : kReportColumns) out << ' ' << name << " |";
  out << "\n|---|---|";
  for (std::size_t c = 0; c < kReportColumns.size(); ++c) out << "---:|";
  out << '\n';
  for (std::size_t row = 0; row < results.rows.size(); ++row) {
    const auto& r = results.rows[row];
    out << "| " << r.entry.run_id << " | "
        << (r.entry.auxiliary_tasks.empty() ? std::string("-") : join(r.entry.auxiliary_tasks, ", ")) << " |";
    for (std::size_t c = 0; c < 6; ++c) {
      if (std::stod(cells[row][c]) == best[c]) out << " **" << cells[row][c] << "** |";
      else out << ' ' << cells[row][c] << " |";
    }
    out << '\n';
  }
  return out.str();
}

std::string render_csv(const GridResults& results) {
  std::ostringstream out;
  out << "run,mode,auxiliary_tasks,macro_f1,micro_f1,binary_f1,precision,recall,ce_loss,n\n";
  out.precision(17);
  for (const auto& r : results.rows) {
    out << r.entry.run_id << ',' << to_string(r.entry.mode) << ",\"" << join(r.entry.auxiliary_tasks, ";") << '"';
    for (double v : columns(r.report)) out << ',' << v;
    out << ',' << r.report.n << '\n';
  }
  return out.str();
}

}  // namespace mtlf::cli
