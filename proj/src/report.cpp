#include "seqmargin/report.hpp"

#include <charconv>
#include <cmath>
#include <optional>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "seqmargin/error.hpp"

namespace seqmargin {

using nlohmann::json;

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) {
    fail(ErrorCode::kArgument, "row has " + std::to_string(row.size()) + " cells, table " + name +
                                   " has " + std::to_string(columns.size()) + " columns");
  }
  rows.push_back(std::move(row));
}

std::size_t Table::column(const std::string& col) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == col) return i;
  }
  fail(ErrorCode::kArgument, "table " + name + " has no column " + col);
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";  // "n" covers inf and nan
  return s;
}

namespace {

std::optional<Cell> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* b = s.data();
  const char* e = b + s.size();
  if (s.find_first_of(".eEni") == std::string::npos) {
    std::int64_t i = 0;
    auto r = std::from_chars(b, e, i);
    if (r.ec == std::errc() && r.ptr == e) return Cell(i);
    return std::nullopt;
  }
  double d = 0.0;
  auto r = std::from_chars(b, e, d);
  if (r.ec == std::errc() && r.ptr == e) return Cell(d);
  return std::nullopt;
}

std::string csv_field(const Cell& c) {
  if (auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (auto* d = std::get_if<double>(&c)) return format_number(*d);
  const std::string& s = std::get<std::string>(c);
  if (s.find_first_of("\r\n") != std::string::npos) {
    fail(ErrorCode::kArgument, "report cells cannot contain line breaks");
  }
  const bool quote = s.empty() || s.find_first_of(",\"#") != std::string::npos ||
                     s.front() == ' ' || s.back() == ' ' || parse_number(s).has_value();
  if (!quote) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

// Splits one CSV line; `quoted` marks fields that were quoted.
std::vector<std::string> split_csv(const std::string& line, std::vector<bool>& quoted) {
  std::vector<std::string> out;
  quoted.clear();
  std::size_t i = 0;
  while (true) {
    std::string field;
    bool q = false;
    if (i < line.size() && line[i] == '"') {
      q = true;
      ++i;
      while (true) {
        if (i >= line.size()) fail(ErrorCode::kFormat, "unterminated quote in CSV line");
        if (line[i] == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field += '"';
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        field += line[i++];
      }
      if (i < line.size() && line[i] != ',') fail(ErrorCode::kFormat, "garbage after quoted CSV field");
    } else {
      while (i < line.size() && line[i] != ',') field += line[i++];
    }
    out.push_back(std::move(field));
    quoted.push_back(q);
    if (i >= line.size()) break;
    ++i;  // comma
  }
  return out;
}

bool starts_with(const std::string& s, const std::string& p) { return s.rfind(p, 0) == 0; }

json cell_json(const Cell& c) {
  if (auto* i = std::get_if<std::int64_t>(&c)) return *i;
  if (auto* d = std::get_if<double>(&c)) {
    if (std::isfinite(*d)) return *d;
    return json{{"nonfinite", format_number(*d)}};
  }
  return std::get<std::string>(c);
}

Cell json_cell(const json& j) {
  if (j.is_number_integer()) return Cell(j.get<std::int64_t>());
  if (j.is_number_float()) return Cell(j.get<double>());
  if (j.is_string()) return Cell(j.get<std::string>());
  if (j.is_object() && j.contains("nonfinite")) {
    auto n = parse_number(j.at("nonfinite").get<std::string>());
    if (n) return *n;
  }
  fail(ErrorCode::kFormat, "unsupported JSON cell " + j.dump());
}

}  // namespace

std::string table_to_csv(const Table& t) {
  std::ostringstream os;
  os << "# schema: " << t.name << "\n# version: " << t.schema_version << "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    os << (i ? "," : "") << csv_field(Cell(t.columns[i]));
  }
  os << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_field(row[i]);
    os << "\n";
  }
  return os.str();
}

Table table_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  Table t;
  bool have_header = false;
  std::vector<bool> quoted;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header && starts_with(line, "#")) {
      if (starts_with(line, "# schema: ")) t.name = line.substr(10);
      else if (starts_with(line, "# version: ")) t.schema_version = static_cast<std::uint32_t>(std::stoul(line.substr(11)));
      continue;
    }
    if (!have_header) {
      t.columns = split_csv(line, quoted);
      have_header = true;
      continue;
    }
    if (line.empty() && t.columns.size() != 1) continue;
    auto fields = split_csv(line, quoted);
    if (fields.size() != t.columns.size()) {
      fail(ErrorCode::kFormat, "CSV row width " + std::to_string(fields.size()) + " != header width " +
                                   std::to_string(t.columns.size()));
    }
    std::vector<Cell> row;
    row.reserve(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      std::optional<Cell> n = quoted[i] ? std::nullopt : parse_number(fields[i]);
      row.push_back(n ? *n : Cell(fields[i]));
    }
    t.rows.push_back(std::move(row));
  }
  if (!have_header) fail(ErrorCode::kFormat, "CSV report has no header line");
  return t;
}

std::string table_to_json(const Table& t) {
  json j;
  j["schema"] = t.name;
  j["version"] = t.schema_version;
  j["columns"] = t.columns;
  json rows = json::array();
  for (const auto& row : t.rows) {
    json r = json::array();
    for (const auto& c : row) r.push_back(cell_json(c));
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j.dump(1) + "\n";
}

Table table_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
    Table t;
    t.name = j.at("schema").get<std::string>();
    t.schema_version = j.at("version").get<std::uint32_t>();
    t.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& r : j.at("rows")) {
      std::vector<Cell> row;
      for (const auto& c : r) row.push_back(json_cell(c));
      t.add_row(std::move(row));
    }
    return t;
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("malformed JSON report: ") + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCode::kIo, "cannot open " + path + " for writing");
  os << contents;
  if (!os.flush()) fail(ErrorCode::kIo, "failed writing " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void emit_report(const Table& t, const std::string& path, ReportFormat format) {
  write_text_file(path, format == ReportFormat::kCsv ? table_to_csv(t) : table_to_json(t));
}

Table read_report(const std::string& path, ReportFormat format) {
  const std::string text = read_text_file(path);
  return format == ReportFormat::kCsv ? table_from_csv(text) : table_from_json(text);
}

namespace {
Cell count(std::uint64_t v) { return Cell(static_cast<std::int64_t>(v)); }
}  // namespace

Table margin_records_table(std::span<const MarginRecord> records, double f) {
  Table t{"margin_records", 1,
          {"local_margin", "local_margin_log", "global_margin", "correct_len", "predicted_len",
           "first_divergence_pos", "length_norm_f"},
          {}};
  for (const auto& r : records) {
    t.add_row({r.local_margin, r.local_margin_log, r.global_margin, count(r.correct_len),
               count(r.predicted_len), count(r.first_divergence_pos), f});
  }
  return t;
}

Table recall_report_table(const RecallTable& recall, double f) {
  Table t{"recall", 1, {"K", "bucket", "num", "den", "recall", "length_norm_f"}, {}};
  for (const auto& c : recall.cells()) {
    t.add_row({count(c.k), bucket_label(c.bucket), count(c.numerator), count(c.denominator),
               c.recall(), f});
  }
  return t;
}

Table beam_sweep_table(const BeamSweepTable& sweep, double f) {
  Table t{"beam_sweep", 1, {"width", "bucket", "correct", "total", "length_norm_f"}, {}};
  for (const auto& c : sweep.rows()) {
    t.add_row({count(c.width), bucket_label(c.bucket), count(c.correct), count(c.total), f});
  }
  return t;
}

Table toy_sweep_table(std::span<const toy::SweepRow> rows) {
  Table t{"toy_sweep", 1,
          {"mode", "grid_value", "global_model_margin", "local_model_global_margin",
           "local_model_local_margin", "seed"},
          {}};
  for (const auto& r : rows) {
    t.add_row({std::string(toy::sweep_mode_name(r.mode)), r.grid_value, r.global_model_margin,
               r.local_model_global_margin, r.local_model_local_margin, count(r.seed)});
  }
  return t;
}

std::string histogram_json(const Histogram2d& h, double f) {
  json j;
  j["schema"] = "hist2d";
  j["version"] = 1;
  j["length_norm_f"] = f;
  j["local_scale"] = h.scale == MarginScale::kProbability ? "probability" : "log";
  j["bins"] = h.bins;
  j["global_edges"] = h.global_edges;
  j["local_edges"] = h.local_edges;
  json counts = json::array();
  for (std::size_t r = 0; r < h.bins; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < h.bins; ++c) row.push_back(h.at(r, c));
    counts.push_back(std::move(row));
  }
  j["counts"] = std::move(counts);
  j["total"] = h.total;
  j["quadrant_fractions"] = {{"local_pos_global_neg", h.quadrant_fractions[0]},
                             {"local_pos_global_nonneg", h.quadrant_fractions[1]},
                             {"local_nonpos_global_neg", h.quadrant_fractions[2]},
                             {"local_nonpos_global_nonneg", h.quadrant_fractions[3]}};
  j["frac_global_negative"] = h.frac_global_negative;
  j["mean_local"] = h.mean_local;
  j["mean_global"] = h.mean_global;
  return j.dump(1) + "\n";
}

}  // namespace seqmargin
