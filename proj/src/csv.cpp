#include "pbs/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pbs/error.hpp"

namespace pbs {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void ingest_fail(const std::filesystem::path& path, std::size_t line,
                              const std::string& what) {
  std::ostringstream msg;
  msg << path.string() << ":" << line << ": " << what;
  fail(ErrorCode::Ingestion, msg.str());
}

}  // namespace

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::optional<double> parse_real(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text == "nan" || text == "NaN") return std::nan("");
  if (text == "inf") return HUGE_VAL;
  if (text == "-inf") return -HUGE_VAL;
  if (text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

std::optional<long long> parse_integer(std::string_view text) {
  text = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    fields.emplace_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

MatrixTable read_matrix_csv(const std::filesystem::path& path, bool allow_missing_response) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) ingest_fail(path, 1, "missing header row");
  const auto header = split_csv_line(line);
  if (header.size() < 2) ingest_fail(path, 1, "need a response column and at least one feature");
  MatrixTable table;
  table.response_name = header[0];
  table.feature_names.assign(header.begin() + 1, header.end());

  std::vector<std::vector<double>> rows;
  std::vector<double> ys;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      std::ostringstream msg;
      msg << "expected " << header.size() << " fields, found " << fields.size();
      ingest_fail(path, line_no, msg.str());
    }
    double y = std::nan("");
    if (allow_missing_response && (fields[0].empty() || fields[0] == "NA")) {
      // unknown truth
    } else {
      const auto v = parse_real(fields[0]);
      if (!v || !std::isfinite(*v)) ingest_fail(path, line_no, "bad response value '" + fields[0] + "'");
      y = *v;
    }
    std::vector<double> row;
    row.reserve(fields.size() - 1);
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const auto v = parse_real(fields[c]);
      if (!v || !std::isfinite(*v))
        ingest_fail(path, line_no, "bad value '" + fields[c] + "' in column " + header[c]);
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
    ys.push_back(y);
  }
  if (rows.empty()) ingest_fail(path, line_no, "no data rows");
  table.x.resize(static_cast<Index>(rows.size()), static_cast<Index>(header.size() - 1));
  table.y.resize(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      table.x(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    table.y(static_cast<Index>(r)) = ys[r];
  }
  return table;
}

void write_matrix_csv(const std::filesystem::path& path, const MatrixTable& table) {
  std::ostringstream out;
  out << table.response_name;
  for (const auto& name : table.feature_names) out << ',' << name;
  out << '\n';
  for (Index r = 0; r < table.x.rows(); ++r) {
    out << (std::isnan(table.y(r)) ? std::string("NA") : format_real(table.y(r)));
    for (Index c = 0; c < table.x.cols(); ++c) out << ',' << format_real(table.x(r, c));
    out << '\n';
  }
  write_text_file(path, out.str());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << contents;
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace pbs
