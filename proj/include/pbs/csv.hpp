#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pbs/types.hpp"

namespace pbs {

/// Shortest-safe round-trip form: 17 significant digits.
std::string format_real(double value);

/// Strict parse of the whole field; nullopt on any trailing junk.
std::optional<double> parse_real(std::string_view text);
std::optional<long long> parse_integer(std::string_view text);

/// Splits on commas after stripping a trailing carriage return. Fields are
/// trimmed of surrounding blanks; quoting is not supported.
std::vector<std::string> split_csv_line(std::string_view line);

/// Plain regression table: header row, first column the response, remaining
/// columns features. Empty or "NA" responses are allowed only when
/// `allow_missing_response` is set and come back as NaN.
struct MatrixTable {
  std::vector<std::string> feature_names;
  std::string response_name;
  Matrix x;
  Vector y;
};

MatrixTable read_matrix_csv(const std::filesystem::path& path, bool allow_missing_response = false);
void write_matrix_csv(const std::filesystem::path& path, const MatrixTable& table);

/// Reads a whole file; Io error when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace pbs
