#include "dsr/report.hpp"

#include <algorithm>
#include <cmath>

#include "dsr/errors.hpp"
#include "json.hpp"

namespace dsr {

TableFormat table_format_from_string(const std::string& name) {
  if (name == "markdown") return TableFormat::Markdown;
  if (name == "csv") return TableFormat::Csv;
  if (name == "json") return TableFormat::Json;
  throw DsrError(ErrorCode::InvalidConfig,
                 "unknown table format '" + name + "'");
}

std::string format_fixed(double value, int decimals) {
  if (decimals < 0 || decimals > 9) {
    throw DsrError(ErrorCode::InvalidConfig,
                   "decimals must lie in [0,9]");
  }
  double scale = 1.0;
  for (int i = 0; i < decimals; ++i) scale *= 10.0;
  const long long scaled = std::llround(value * scale);
  const bool negative = scaled < 0;
  std::string digits =
      std::to_string(negative ? -(unsigned long long)scaled : (unsigned long long)scaled);
  if (decimals == 0) return (negative ? "-" : "") + digits;
  if (digits.size() <= static_cast<std::size_t>(decimals)) {
    digits.insert(0, static_cast<std::size_t>(decimals) + 1 - digits.size(),
                  '0');
  }
  digits.insert(digits.size() - static_cast<std::size_t>(decimals), ".");
  return (negative ? "-" : "") + digits;
}

void ResultsTable::add_row(const std::string& label,
                           std::vector<std::optional<double>> values) {
  if (values.size() != columns.size()) {
    throw DsrError(ErrorCode::IncompleteRow,
                   "row '" + label + "' has " + std::to_string(values.size()) +
                       " cells for " + std::to_string(columns.size()) +
                       " columns");
  }
  row_labels.push_back(label);
  cells.push_back(std::move(values));
}

std::optional<double> ResultsTable::cell(const std::string& row,
                                         const std::string& col) const {
  const auto r = std::find(row_labels.begin(), row_labels.end(), row);
  const auto c = std::find(columns.begin(), columns.end(), col);
  if (r == row_labels.end() || c == columns.end()) return std::nullopt;
  return cells[static_cast<std::size_t>(r - row_labels.begin())]
              [static_cast<std::size_t>(c - columns.begin())];
}

ResultsTable compute_deltas(const ResultsTable& table,
                            const std::string& baseline_row) {
  const auto baseline_avg = table.cell(baseline_row, table.avg_column);
  if (std::find(table.row_labels.begin(), table.row_labels.end(),
                baseline_row) == table.row_labels.end() ||
      !baseline_avg) {
    throw DsrError(ErrorCode::IncompleteRow,
                   "baseline row '" + baseline_row +
                       "' is missing or lacks an AVG cell");
  }
  ResultsTable out = table;
  out.deltas.clear();
  for (const auto& label : out.row_labels) {
    if (label == baseline_row) continue;
    const auto avg = out.cell(label, out.avg_column);
    if (!avg) {
      throw DsrError(ErrorCode::IncompleteRow,
                     "row '" + label + "' lacks an AVG cell");
    }
    out.deltas[label] = *baseline_avg - *avg;
  }
  return out;
}

double average_final(const std::vector<double>& finals) {
  if (finals.empty()) {
    throw DsrError(ErrorCode::EmptyGroup, "no final rates to average");
  }
  double sum = 0.0;
  for (double value : finals) sum += value;
  return sum / static_cast<double>(finals.size());
}

namespace {

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::string delta_suffix(const ResultsTable& table, const std::string& row) {
  const auto it = table.deltas.find(row);
  if (it == table.deltas.end()) return "";
  return " (Δ " + format_fixed(it->second, 2) + "%)";
}

std::string render_markdown(const ResultsTable& table) {
  std::string out = "| " + table.corner_label + " |";
  for (const auto& col : table.columns) out += " " + col + " |";
  out += "\n|";
  for (std::size_t i = 0; i <= table.columns.size(); ++i) out += " --- |";
  out += "\n";
  for (std::size_t r = 0; r < table.row_labels.size(); ++r) {
    out += "| " + table.row_labels[r] + " |";
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      const auto& cell = table.cells[r][c];
      std::string text =
          cell ? format_fixed(*cell, table.precision) : std::string("---");
      if (cell && table.columns[c] == table.avg_column) {
        text += delta_suffix(table, table.row_labels[r]);
      }
      out += " " + text + " |";
    }
    out += "\n";
  }
  return out;
}

std::string render_csv(const ResultsTable& table) {
  const bool with_delta = !table.deltas.empty();
  std::string out = csv_escape(table.corner_label);
  for (const auto& col : table.columns) out += "," + csv_escape(col);
  if (with_delta) out += ",delta_vs_baseline";
  out += "\r\n";
  for (std::size_t r = 0; r < table.row_labels.size(); ++r) {
    out += csv_escape(table.row_labels[r]);
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      const auto& cell = table.cells[r][c];
      out += ",";
      out += cell ? format_fixed(*cell, table.precision) : std::string("---");
    }
    if (with_delta) {
      const auto it = table.deltas.find(table.row_labels[r]);
      out += ",";
      out += it != table.deltas.end() ? format_fixed(it->second, 2)
                                      : std::string("---");
    }
    out += "\r\n";
  }
  return out;
}

std::string render_json(const ResultsTable& table) {
  nlohmann::json doc;
  doc["avg_column"] = table.avg_column;
  doc["columns"] = table.columns;
  doc["corner_label"] = table.corner_label;
  doc["precision"] = table.precision;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < table.row_labels.size(); ++r) {
    nlohmann::json row;
    row["label"] = table.row_labels[r];
    nlohmann::json cells;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      const auto& cell = table.cells[r][c];
      cells[table.columns[c]] = cell ? nlohmann::json(*cell) : nullptr;
    }
    row["cells"] = std::move(cells);
    const auto it = table.deltas.find(table.row_labels[r]);
    row["delta"] =
        it != table.deltas.end() ? nlohmann::json(it->second) : nullptr;
    rows.push_back(std::move(row));
  }
  doc["rows"] = std::move(rows);
  return doc.dump() + "\n";
}

const char* severity_code(Severity severity) {
  switch (severity) {
    case Severity::Moderate: return "M";
    case Severity::Low: return "L";
    case Severity::VeryLow: return "VL";
    case Severity::Control: return "CTL";
    case Severity::Unknown: return "UNK";
  }
  throw DsrError(ErrorCode::InternalInvariant, "unreachable severity");
}

const std::optional<double> kAbsent;

std::optional<double> stage_rate(const SpeakerTrajectory& trajectory,
                                 Setting setting) {
  for (const auto& record : trajectory.stages) {
    if (record.setting == setting) return record.rate;
  }
  return std::nullopt;
}

}  // namespace

std::string render(const ResultsTable& table, TableFormat format) {
  switch (format) {
    case TableFormat::Markdown: return render_markdown(table);
    case TableFormat::Csv: return render_csv(table);
    case TableFormat::Json: return render_json(table);
  }
  throw DsrError(ErrorCode::InternalInvariant, "unreachable table format");
}

ResultsTable severity_stage_table(
    const std::vector<SpeakerTrajectory>& trajectories,
    const std::vector<Setting>& stage_order, int precision) {
  if (trajectories.empty()) {
    throw DsrError(ErrorCode::EmptyGroup, "no trajectories to tabulate");
  }
  static constexpr Severity kOrder[] = {Severity::Moderate, Severity::Low,
                                        Severity::VeryLow, Severity::Control,
                                        Severity::Unknown};
  ResultsTable table;
  table.corner_label = "setting";
  table.precision = precision;
  for (Severity severity : kOrder) {
    const bool present = std::any_of(
        trajectories.begin(), trajectories.end(),
        [&](const SpeakerTrajectory& t) { return t.severity == severity; });
    if (present) table.columns.push_back(severity_code(severity));
  }
  table.columns.push_back(table.avg_column);

  for (Setting setting : stage_order) {
    std::vector<std::optional<double>> row;
    std::map<std::string, std::pair<double, std::size_t>> sums;
    double avg_sum = 0.0;
    std::size_t avg_n = 0;
    for (const auto& trajectory : trajectories) {
      const auto rate = stage_rate(trajectory, setting);
      if (!rate) continue;
      auto& [sum, count] = sums[severity_code(trajectory.severity)];
      sum += *rate;
      count += 1;
      if (trajectory.severity != Severity::Control) {
        avg_sum += *rate;
        avg_n += 1;
      }
    }
    for (const auto& col : table.columns) {
      if (col == table.avg_column) {
        row.push_back(avg_n == 0 ? kAbsent
                                 : std::optional<double>(
                                       100.0 * avg_sum /
                                       static_cast<double>(avg_n)));
      } else {
        const auto it = sums.find(col);
        row.push_back(it == sums.end()
                          ? kAbsent
                          : std::optional<double>(
                                100.0 * it->second.first /
                                static_cast<double>(it->second.second)));
      }
    }
    table.add_row(to_string(setting), std::move(row));
  }
  return table;
}

ResultsTable speaker_stage_table(
    const std::vector<SpeakerTrajectory>& trajectories,
    const std::vector<Setting>& stage_order, int precision) {
  if (trajectories.empty()) {
    throw DsrError(ErrorCode::EmptyGroup, "no trajectories to tabulate");
  }
  ResultsTable table;
  table.corner_label = "speaker";
  table.precision = precision;
  for (Setting setting : stage_order) {
    table.columns.push_back(to_string(setting));
  }
  table.columns.push_back("final");

  std::vector<const SpeakerTrajectory*> sorted;
  sorted.reserve(trajectories.size());
  for (const auto& trajectory : trajectories) sorted.push_back(&trajectory);
  std::sort(sorted.begin(), sorted.end(),
            [](const SpeakerTrajectory* a, const SpeakerTrajectory* b) {
              return a->speaker_id < b->speaker_id;
            });

  for (const SpeakerTrajectory* trajectory : sorted) {
    std::vector<std::optional<double>> row;
    for (Setting setting : stage_order) {
      const auto rate = stage_rate(*trajectory, setting);
      row.push_back(rate ? std::optional<double>(100.0 * *rate) : kAbsent);
    }
    row.push_back(trajectory->final_rate
                      ? std::optional<double>(100.0 * *trajectory->final_rate)
                      : kAbsent);
    table.add_row(trajectory->speaker_id, std::move(row));
  }
  return table;
}

}  // namespace dsr
