#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dsr/pipeline.hpp"

namespace dsr {

enum class TableFormat { Markdown, Csv, Json };

TableFormat table_format_from_string(const std::string& name);

/// Fixed-point rendering, half away from zero: format_fixed(3.285, 2) is
/// "3.29". Negative values that round to zero drop the sign.
std::string format_fixed(double value, int decimals);

/// Rate table in percentage points. Cells are addressed [row][column];
/// an absent cell renders "---" (null in json).
struct ResultsTable {
  std::string corner_label;
  std::vector<std::string> columns;
  std::vector<std::string> row_labels;
  std::vector<std::vector<std::optional<double>>> cells;
  std::map<std::string, double> deltas;  // row -> baseline AVG minus row AVG
  int precision = 2;   // rendered cell decimals; deltas always use 2
  std::string avg_column = "AVG";

  /// Throws IncompleteRow when the value count does not match the columns.
  void add_row(const std::string& label,
               std::vector<std::optional<double>> values);

  std::optional<double> cell(const std::string& row,
                             const std::string& col) const;
};

/// Attaches delta = baseline AVG - row AVG (computed at full precision) to
/// every non-baseline row. Throws IncompleteRow when the baseline row is
/// absent or any involved row lacks an AVG value.
ResultsTable compute_deltas(const ResultsTable& table,
                            const std::string& baseline_row);

/// Unweighted arithmetic mean of per-speaker final rates, full precision.
/// Throws EmptyGroup on empty input.
double average_final(const std::vector<double>& finals);

/// Deterministic, byte-stable rendering. Markdown and CSV write formatted
/// numbers at the table's precision and append " (Δ d.dd%)" to AVG cells of
/// rows carrying a delta (CSV uses a trailing delta column instead); JSON
/// carries full-precision numbers so parsing it back loses nothing.
std::string render(const ResultsTable& table, TableFormat format);

/// Severity-group view: one row per stage, columns per severity code plus
/// AVG; a cell averages the speakers of that severity which ran the stage.
ResultsTable severity_stage_table(
    const std::vector<SpeakerTrajectory>& trajectories,
    const std::vector<Setting>& stage_order, int precision = 2);

/// Per-speaker view: one row per speaker, a column per stage plus "final"
/// (the trajectory's recorded final rate); never-run stages stay absent.
ResultsTable speaker_stage_table(
    const std::vector<SpeakerTrajectory>& trajectories,
    const std::vector<Setting>& stage_order, int precision = 1);

}  // namespace dsr
