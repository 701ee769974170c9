#include "pbs/demand.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <set>
#include <sstream>

#include "pbs/csv.hpp"
#include "pbs/error.hpp"

namespace pbs {

namespace {

[[noreturn]] void ingest_fail(const std::string& source, std::size_t line, const std::string& what) {
  std::ostringstream msg;
  msg << source << ":" << line << ": " << what;
  fail(ErrorCode::Ingestion, msg.str());
}

std::vector<std::string> expect_header(std::istream& in, const std::string& source,
                                       const std::vector<std::string>& expected) {
  std::string line;
  if (!std::getline(in, line)) ingest_fail(source, 1, "missing header row");
  auto header = split_csv_line(line);
  if (header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    ingest_fail(source, 1, "header must be '" + want + "'");
  }
  return header;
}

Day parse_day_field(const std::string& field, const std::string& source, std::size_t line) {
  const auto day = parse_iso_date(field);
  if (!day) ingest_fail(source, line, "bad ISO-8601 date '" + field + "'");
  return *day;
}

}  // namespace

std::optional<Day> parse_iso_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
    if (text[i] < '0' || text[i] > '9') return std::nullopt;
  const auto y = parse_integer(text.substr(0, 4));
  const auto m = parse_integer(text.substr(5, 2));
  const auto d = parse_integer(text.substr(8, 2));
  if (!y || !m || !d) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year(static_cast<int>(*y)),
                                        std::chrono::month(static_cast<unsigned>(*m)),
                                        std::chrono::day(static_cast<unsigned>(*d))};
  if (!ymd.ok()) return std::nullopt;
  return Day(ymd);
}

std::string format_iso_date(Day day) {
  const std::chrono::year_month_day ymd(day);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::optional<double> DemandTable::at(Day day, int hour) const {
  if (hour < 1 || hour > 24) return std::nullopt;
  const auto it = values.find(day);
  if (it == values.end()) return std::nullopt;
  const double v = it->second[static_cast<std::size_t>(hour - 1)];
  if (std::isnan(v)) return std::nullopt;
  return v;
}

void DemandTable::set(Day day, int hour, double value) {
  if (hour < 1 || hour > 24) fail(ErrorCode::InvalidArgument, "hour must lie in 1..24");
  auto [it, inserted] = values.try_emplace(day);
  if (inserted) it->second.fill(std::numeric_limits<double>::quiet_NaN());
  it->second[static_cast<std::size_t>(hour - 1)] = value;
}

DemandTable read_demand_csv(std::istream& in, const std::string& source) {
  expect_header(in, source, {"date", "hour", "demand"});
  DemandTable table;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 3) ingest_fail(source, line_no, "expected 3 fields, found " + std::to_string(f.size()));
    const Day day = parse_day_field(f[0], source, line_no);
    const auto hour = parse_integer(f[1]);
    if (!hour || *hour < 1 || *hour > 24) ingest_fail(source, line_no, "hour must be an integer in 1..24");
    const auto value = parse_real(f[2]);
    if (!value || !std::isfinite(*value)) ingest_fail(source, line_no, "bad demand value '" + f[2] + "'");
    if (table.at(day, static_cast<int>(*hour)))
      ingest_fail(source, line_no, "duplicate entry for " + f[0] + " hour " + f[1]);
    table.set(day, static_cast<int>(*hour), *value);
  }
  return table;
}

DemandTable read_demand_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return read_demand_csv(in, path.string());
}

TemperatureTable read_temperature_csv(std::istream& in, const std::string& source) {
  expect_header(in, source, {"date", "mean_temp"});
  TemperatureTable table;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 2) ingest_fail(source, line_no, "expected 2 fields, found " + std::to_string(f.size()));
    const Day day = parse_day_field(f[0], source, line_no);
    const auto value = parse_real(f[1]);
    if (!value || !std::isfinite(*value)) ingest_fail(source, line_no, "bad temperature '" + f[1] + "'");
    if (!table.emplace(day, *value).second) ingest_fail(source, line_no, "duplicate date " + f[0]);
  }
  return table;
}

TemperatureTable read_temperature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return read_temperature_csv(in, path.string());
}

void validate_demand_spec(const DemandModelSpec& spec) {
  if (spec.lags < 1) fail(ErrorCode::InvalidArgument, "demand model needs at least one lag");
  validate_spline(spec.hour_basis);
  validate_spline(spec.temp_basis);
  if (!spec.hour_basis.cyclic) fail(ErrorCode::InvalidArgument, "hour basis must be cyclic");
  if (spec.temp_basis.cyclic) fail(ErrorCode::InvalidArgument, "temperature basis must not be cyclic");
}

std::vector<DemandBasisSize> default_demand_sizes() {
  return {{1, 1, 6, 20}, {2, 2, 6, 24}, {3, 2, 8, 18}, {4, 4, 8, 24}};
}

DemandModelSpec make_demand_spec(const DemandBasisSize& size, double temp_lo, double temp_hi,
                                 int hour_degree, int temp_degree) {
  DemandModelSpec spec;
  spec.candidate_id = size.candidate_id;
  spec.lags = size.lags;
  spec.hour_basis = SplineBasisSpec::cyclic_uniform(hour_degree, size.hour_bases, 0.0, 24.0);
  spec.temp_basis = SplineBasisSpec::open_uniform(temp_degree, size.temp_bases, temp_lo, temp_hi);
  validate_demand_spec(spec);
  return spec;
}

std::pair<double, double> temperature_domain(const TemperatureTable& temps, std::span<const Day> days,
                                             double pad_fraction) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::vector<std::string> missing;
  for (Day d : days) {
    const auto it = temps.find(d);
    if (it == temps.end()) {
      missing.push_back(format_iso_date(d));
      continue;
    }
    lo = std::min(lo, it->second);
    hi = std::max(hi, it->second);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    fail(ErrorCode::Ingestion, "missing temperature for: " + list);
  }
  if (days.empty()) fail(ErrorCode::InvalidArgument, "no days for temperature domain");
  const double pad = std::max(pad_fraction * (hi - lo), 0.5);
  return {lo - pad, hi + pad};
}

std::vector<Day> training_window(Day target, int window_days, bool same_weekday) {
  if (window_days < 1) fail(ErrorCode::InvalidArgument, "window length must be >= 1");
  std::vector<Day> out;
  const int step = same_weekday ? 7 : 1;
  for (int k = window_days; k >= 1; --k) out.push_back(target - std::chrono::days(step * k));
  return out;
}

DemandRows assemble_demand_rows(const DemandTable& demand, const TemperatureTable& temps,
                                std::span<const DemandModelSpec> specs, std::span<const Day> days,
                                std::span<const int> hours, bool require_response) {
  if (specs.empty()) fail(ErrorCode::InvalidArgument, "no demand model specs");
  int max_lags = 0;
  Index width = 0;
  for (const auto& s : specs) {
    validate_demand_spec(s);
    max_lags = std::max(max_lags, s.lags);
    width += static_cast<Index>(s.hour_basis.basis_count()) * s.temp_basis.basis_count();
  }
  for (int h : hours)
    if (h < 1 || h > 24) fail(ErrorCode::InvalidArgument, "hour must lie in 1..24");
  width += max_lags;

  DemandRows rows;
  const Index n = static_cast<Index>(days.size() * hours.size());
  rows.x.resize(n, width);
  rows.y.resize(n);
  for (int t = 1; t <= max_lags; ++t) rows.column_names.push_back("lag" + std::to_string(t));
  for (const auto& s : specs)
    for (int m = 0; m < s.temp_basis.basis_count(); ++m)
      for (int q = 0; q < s.hour_basis.basis_count(); ++q)
        rows.column_names.push_back("c" + std::to_string(s.candidate_id) + "_h" + std::to_string(q + 1) +
                                    "_g" + std::to_string(m + 1));

  std::set<std::string> missing;
  Index r = 0;
  for (Day day : days) {
    const auto temp = temps.find(day);
    if (temp == temps.end()) missing.insert("temperature " + format_iso_date(day));
    std::vector<Vector> temp_values;
    for (const auto& s : specs) {
      if (temp == temps.end()) {
        temp_values.push_back(Vector::Zero(s.temp_basis.basis_count()));
        continue;
      }
      if (temp->second < s.temp_basis.lo || temp->second > s.temp_basis.hi) {
        std::ostringstream msg;
        msg << "temperature " << temp->second << " on " << format_iso_date(day)
            << " lies outside the basis domain [" << s.temp_basis.lo << ", " << s.temp_basis.hi << "]";
        fail(ErrorCode::InvalidArgument, msg.str());
      }
      temp_values.push_back(bspline_basis(s.temp_basis, temp->second));
    }

    for (int hour : hours) {
      rows.days.push_back(day);
      rows.hours.push_back(hour);
      const auto y = demand.at(day, hour);
      if (!y && require_response)
        missing.insert("demand " + format_iso_date(day) + " hour " + std::to_string(hour));
      rows.y(r) = y ? *y : std::numeric_limits<double>::quiet_NaN();
      for (int t = 1; t <= max_lags; ++t) {
        const Day lag_day = day - std::chrono::days(t);
        const auto lag = demand.at(lag_day, hour);
        if (!lag) missing.insert("demand " + format_iso_date(lag_day) + " hour " + std::to_string(hour));
        rows.x(r, t - 1) = lag ? *lag : 0.0;
      }
      Index col = max_lags;
      for (std::size_t k = 0; k < specs.size(); ++k) {
        const Vector h = cyclic_bspline_basis(specs[k].hour_basis, static_cast<double>(hour));
        const Vector& g = temp_values[k];
        for (Index m = 0; m < g.size(); ++m)
          for (Index q = 0; q < h.size(); ++q) rows.x(r, col++) = h(q) * g(m);
      }
      ++r;
    }
  }

  if (!missing.empty()) {
    std::ostringstream msg;
    msg << missing.size() << " missing input value(s): ";
    std::size_t shown = 0;
    for (const auto& m : missing) {
      if (shown == 25) {
        msg << ", ...";
        break;
      }
      msg << (shown++ ? ", " : "") << m;
    }
    fail(ErrorCode::Ingestion, msg.str());
  }
  return rows;
}

std::vector<CandidateModel> demand_candidates(std::span<const DemandModelSpec> specs) {
  int max_lags = 0;
  for (const auto& s : specs) max_lags = std::max(max_lags, s.lags);
  std::vector<CandidateModel> out;
  Index offset = max_lags;
  for (const auto& s : specs) {
    CandidateModel m{s.candidate_id, {}};
    for (int t = 0; t < s.lags; ++t) m.columns.push_back(t);
    const Index block = static_cast<Index>(s.hour_basis.basis_count()) * s.temp_basis.basis_count();
    for (Index c = 0; c < block; ++c) m.columns.push_back(offset + c);
    offset += block;
    out.push_back(std::move(m));
  }
  return out;
}

Dataset build_demand_design(const DemandTable& demand, const TemperatureTable& temps,
                            const DemandModelSpec& spec, std::span<const Day> days,
                            std::optional<int> hour) {
  std::vector<int> hours;
  if (hour) {
    hours.push_back(*hour);
  } else {
    for (int h = 1; h <= 24; ++h) hours.push_back(h);
  }
  auto rows = assemble_demand_rows(demand, temps, std::span(&spec, 1), days, hours, true);
  return Dataset(std::move(rows.x), std::move(rows.y), std::move(rows.column_names));
}

}  // namespace pbs
