#pragma once

#include <array>
#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pbs/model_core.hpp"
#include "pbs/spline.hpp"

namespace pbs {

using Day = std::chrono::sys_days;

std::optional<Day> parse_iso_date(std::string_view text);
std::string format_iso_date(Day day);

/// Hourly demand keyed by day; hours are 1..24, NaN marks an absent reading.
struct DemandTable {
  std::map<Day, std::array<double, 24>> values;

  std::optional<double> at(Day day, int hour) const;
  void set(Day day, int hour, double value);
};

using TemperatureTable = std::map<Day, double>;

/// `date,hour,demand` with ISO-8601 dates and hours 1..24.
DemandTable read_demand_csv(std::istream& in, const std::string& source);
DemandTable read_demand_csv(const std::filesystem::path& path);
/// `date,mean_temp` in degrees Celsius.
TemperatureTable read_temperature_csv(std::istream& in, const std::string& source);
TemperatureTable read_temperature_csv(const std::filesystem::path& path);

/// One candidate of the hourly demand model
///   y_ij = sum_t alpha_t y_(i-t)j + sum_m sum_q c_qm h_q(j) g_m(s_i),
/// with h a cyclic basis in the hour and g a basis in the day's mean
/// temperature. Rows pool every modelled (day, hour).
struct DemandModelSpec {
  int candidate_id = 1;
  int lags = 1;
  SplineBasisSpec hour_basis = SplineBasisSpec::cyclic_uniform(3, 6, 0.0, 24.0);
  SplineBasisSpec temp_basis = SplineBasisSpec::open_uniform(3, 20, 0.0, 40.0);

  Index dimension() const noexcept {
    return lags + static_cast<Index>(hour_basis.basis_count()) * temp_basis.basis_count();
  }
};

void validate_demand_spec(const DemandModelSpec& spec);

struct DemandBasisSize {
  int candidate_id;
  int lags;
  int hour_bases;
  int temp_bases;
};

/// Four candidates with p = 121, 146, 146 and 196.
std::vector<DemandBasisSize> default_demand_sizes();

DemandModelSpec make_demand_spec(const DemandBasisSize& size, double temp_lo, double temp_hi,
                                 int hour_degree = 3, int temp_degree = 3);

/// Min/max temperature over `days`, padded by max(pad_fraction * range, 0.5).
std::pair<double, double> temperature_domain(const TemperatureTable& temps, std::span<const Day> days,
                                             double pad_fraction = 0.05);

/// Training days preceding `target`: the previous `window_days` days, or the
/// previous `window_days` same-weekday days. Chronological order.
std::vector<Day> training_window(Day target, int window_days, bool same_weekday);

struct DemandRows {
  Matrix x;
  Vector y;  // NaN where the response is absent and not required
  std::vector<Day> days;
  std::vector<int> hours;
  std::vector<std::string> column_names;
};

/// Rows for days x hours (day-major). Columns are max(lags) lag columns
/// y_(i-1)j .. y_(i-T)j followed, for each spec in order, by its tensor block
/// with column index m * Q + q for h_q(j) g_m(s_i). Missing lags,
/// temperatures or (when required) responses raise one ingestion error
/// listing every missing key.
DemandRows assemble_demand_rows(const DemandTable& demand, const TemperatureTable& temps,
                                std::span<const DemandModelSpec> specs, std::span<const Day> days,
                                std::span<const int> hours, bool require_response);

/// Column subsets of assemble_demand_rows' layout, one per spec.
std::vector<CandidateModel> demand_candidates(std::span<const DemandModelSpec> specs);

/// Single-candidate design; all 24 hours unless `hour` is given.
Dataset build_demand_design(const DemandTable& demand, const TemperatureTable& temps,
                            const DemandModelSpec& spec, std::span<const Day> days,
                            std::optional<int> hour = std::nullopt);

}  // namespace pbs
