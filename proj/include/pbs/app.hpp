#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pbs::app {

/// Runs one of `fit`, `predict`, `select-dist`, `sweep-sigma`, `simulate`
/// with a JSON configuration document (see README for the schema). Outputs
/// are written under the configured `out` directory. Returns a short
/// human-readable summary; failures throw pbs::Error.
std::string run_command(std::string_view command, std::string_view config_json);

/// Names accepted by run_command.
const std::vector<std::string>& command_names();

/// One line of report.csv.
struct ReportRow {
  std::string target;
  std::string day;   // demand mode only
  int hour = 0;      // demand mode only, 0 otherwise
  double truth = std::nan("");
  double pbs_pred = 0.0, pbs_lower = 0.0, pbs_upper = 0.0;
  double pbs_smoothing_var = 0.0, pbs_residual_var = 0.0;
  double ridge_pred = 0.0, ridge_lower = 0.0, ridge_upper = 0.0;
  double sigma2 = 0.0, gamma = 0.0;
};

std::vector<ReportRow> read_report_csv(const std::filesystem::path& path);

struct Accuracy {
  std::size_t scored = 0;  // rows with known truth
  double mspe = std::nan("");
  double coverage = std::nan("");
};

Accuracy pbs_accuracy(const std::vector<ReportRow>& rows);
Accuracy ridge_accuracy(const std::vector<ReportRow>& rows);

}  // namespace pbs::app
