#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "seqmargin/diagnostics.hpp"
#include "seqmargin/toymargin.hpp"

namespace seqmargin {

// Strings that would read back as numbers are quoted on output, so parsing
// restores the original alternative.
using Cell = std::variant<std::int64_t, double, std::string>;

struct Table {
  std::string name;
  std::uint32_t schema_version = 1;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row);
  std::size_t column(const std::string& name) const;  // argument error when absent
  friend bool operator==(const Table&, const Table&) = default;
};

// Shortest representation that reads back to the same double. Integral
// values keep a trailing ".0".
std::string format_number(double v);

enum class ReportFormat { kCsv, kJson };

// CSV layout: "# schema: <name>", "# version: <n>", header line, rows.
std::string table_to_csv(const Table& t);
Table table_from_csv(const std::string& text);
std::string table_to_json(const Table& t);
Table table_from_json(const std::string& text);

void emit_report(const Table& t, const std::string& path, ReportFormat format);
Table read_report(const std::string& path, ReportFormat format);
void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);

Table margin_records_table(std::span<const MarginRecord> records, double length_norm_f);
Table recall_report_table(const RecallTable& recall, double length_norm_f);
Table beam_sweep_table(const BeamSweepTable& sweep, double length_norm_f);
Table toy_sweep_table(std::span<const toy::SweepRow> rows);
std::string histogram_json(const Histogram2d& h, double length_norm_f);

}  // namespace seqmargin
