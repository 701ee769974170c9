#include "pbs/app.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pbs/bootstrap.hpp"
#include "pbs/csv.hpp"
#include "pbs/demand.hpp"
#include "pbs/distribution_selector.hpp"
#include "pbs/error.hpp"
#include "pbs/rng.hpp"
#include "pbs/simulation.hpp"

namespace pbs::app {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kFitStream = 1;
constexpr std::uint64_t kCvStream = 2;
constexpr const char* kModelFormat = "pbs-model-1";

// ---------------------------------------------------------------------------
// Configuration

[[noreturn]] void config_fail(const std::string& where, const std::string& what) {
  fail(ErrorCode::Config, where + ": " + what);
}

void allow_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) config_fail(where, "must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) config_fail(where, "unknown key '" + key + "'");
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    config_fail(where + "." + key, "has the wrong type");
  }
}

std::vector<double> real_list(const json& value, const std::string& where) {
  if (!value.is_array() || value.empty()) config_fail(where, "must be a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& v : value) {
    if (!v.is_number()) config_fail(where, "must contain only numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::vector<double> log_grid(int count, double lo, double hi, const std::string& where) {
  if (count < 1 || !(lo > 0.0) || !(hi >= lo)) config_fail(where, "needs count >= 1 and 0 < min <= max");
  if (count == 1) return {lo};
  std::vector<double> out;
  const double a = std::log10(lo), b = std::log10(hi);
  for (int k = 0; k < count; ++k) out.push_back(std::pow(10.0, a + (b - a) * k / (count - 1)));
  return out;
}

enum class DataKind { Matrix, Demand };
enum class ResamplingMode { Cv, Fixed, Unbiased };

struct CandidateRef {
  int id = 0;
  std::vector<json> columns;
};

struct RunConfig {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  double alpha = 0.05;
  fs::path out = ".";
  fs::path model_path;

  DataKind kind = DataKind::Matrix;
  fs::path train_csv, targets_csv;
  fs::path demand_csv, temperature_csv;
  std::vector<Day> target_days;
  int window_days = 15;
  bool same_weekday = true;
  std::vector<DemandBasisSize> demand_models = default_demand_sizes();
  int hour_degree = 3, temp_degree = 3;
  double temp_padding = 0.05;

  std::vector<CandidateRef> candidates;
  std::vector<double> lambda_grid = default_lambda_grid();
  Criterion criterion = Criterion::Gcv;
  int criterion_folds = 5;

  Index bootstrap_size = 500;
  ResamplingMode resampling = ResamplingMode::Cv;
  ResamplingDistribution fixed_dist{1.0, 1.0};

  int cv_folds = 5;
  std::optional<Index> cv_inner_size;
  std::optional<std::vector<double>> cv_sigma2;
  int cv_sigma2_count = 50;
  std::vector<double> cv_gamma = default_gamma_candidates();
  FoldMode fold_mode = FoldMode::Random;
  OlsSource ols_source = OlsSource::PerFold;

  std::vector<double> sweep_sigma2;
  double sweep_gamma = 1.0;

  StudyConfig study;
  bool study_svg = false;
};

void parse_data(const json& d, RunConfig& cfg) {
  const std::string kind = get_or<std::string>(d, "kind", "matrix", "data");
  if (kind == "matrix") {
    allow_keys(d, "data", {"kind", "train", "targets"});
    cfg.kind = DataKind::Matrix;
    cfg.train_csv = get_or<std::string>(d, "train", "", "data");
    cfg.targets_csv = get_or<std::string>(d, "targets", "", "data");
    if (cfg.train_csv.empty()) config_fail("data.train", "is required in matrix mode");
    return;
  }
  if (kind != "demand") config_fail("data.kind", "must be 'matrix' or 'demand'");
  allow_keys(d, "data", {"kind", "demand", "temperature", "targets", "window_days", "same_weekday",
                         "models", "hour_degree", "temp_degree", "temp_padding"});
  cfg.kind = DataKind::Demand;
  cfg.demand_csv = get_or<std::string>(d, "demand", "", "data");
  cfg.temperature_csv = get_or<std::string>(d, "temperature", "", "data");
  if (cfg.demand_csv.empty() || cfg.temperature_csv.empty())
    config_fail("data", "demand mode needs 'demand' and 'temperature' paths");
  cfg.window_days = get_or<int>(d, "window_days", 15, "data");
  cfg.same_weekday = get_or<bool>(d, "same_weekday", true, "data");
  cfg.hour_degree = get_or<int>(d, "hour_degree", 3, "data");
  cfg.temp_degree = get_or<int>(d, "temp_degree", 3, "data");
  cfg.temp_padding = get_or<double>(d, "temp_padding", 0.05, "data");
  if (cfg.window_days < 1) config_fail("data.window_days", "must be >= 1");
  if (!(cfg.temp_padding >= 0.0)) config_fail("data.temp_padding", "must be >= 0");

  if (!d.contains("targets")) config_fail("data.targets", "is required in demand mode");
  const json& t = d.at("targets");
  auto day_of = [](const json& v, const std::string& where) {
    if (!v.is_string()) config_fail(where, "must be an ISO-8601 date string");
    const auto day = parse_iso_date(v.get<std::string>());
    if (!day) config_fail(where, "bad date '" + v.get<std::string>() + "'");
    return *day;
  };
  if (t.is_array()) {
    for (const auto& v : t) cfg.target_days.push_back(day_of(v, "data.targets"));
  } else if (t.is_object()) {
    allow_keys(t, "data.targets", {"from", "to"});
    const Day from = day_of(t.value("from", json()), "data.targets.from");
    const Day to = day_of(t.value("to", json()), "data.targets.to");
    if (to < from) config_fail("data.targets", "'to' precedes 'from'");
    for (Day day = from; day <= to; day += std::chrono::days(1)) cfg.target_days.push_back(day);
  } else {
    config_fail("data.targets", "must be a list of dates or {from, to}");
  }
  if (cfg.target_days.empty()) config_fail("data.targets", "is empty");

  if (d.contains("models")) {
    cfg.demand_models.clear();
    const json& models = d.at("models");
    if (!models.is_array() || models.empty()) config_fail("data.models", "must be a non-empty array");
    for (const auto& m : models) {
      allow_keys(m, "data.models[]", {"id", "lags", "hour_bases", "temp_bases"});
      DemandBasisSize s{get_or<int>(m, "id", static_cast<int>(cfg.demand_models.size()) + 1, "data.models[]"),
                        get_or<int>(m, "lags", 1, "data.models[]"),
                        get_or<int>(m, "hour_bases", 6, "data.models[]"),
                        get_or<int>(m, "temp_bases", 20, "data.models[]")};
      if (s.lags < 1 || s.hour_bases <= cfg.hour_degree || s.temp_bases <= cfg.temp_degree)
        config_fail("data.models[]", "needs lags >= 1 and more bases than the spline degree");
      cfg.demand_models.push_back(s);
    }
  }
  if (cfg.hour_degree < 0 || cfg.hour_degree > 5 || cfg.temp_degree < 0 || cfg.temp_degree > 5)
    config_fail("data", "spline degrees must lie in 0..5");
}

void parse_selector(const json& s, RunConfig& cfg) {
  allow_keys(s, "selector", {"lambda_grid", "criterion", "folds", "candidates"});
  if (s.contains("lambda_grid")) {
    const json& g = s.at("lambda_grid");
    if (g.is_array()) {
      cfg.lambda_grid = real_list(g, "selector.lambda_grid");
    } else {
      allow_keys(g, "selector.lambda_grid", {"count", "min", "max", "include_zero"});
      cfg.lambda_grid = log_grid(get_or<int>(g, "count", 50, "selector.lambda_grid"),
                                 get_or<double>(g, "min", 1e-4, "selector.lambda_grid"),
                                 get_or<double>(g, "max", 1e4, "selector.lambda_grid"),
                                 "selector.lambda_grid");
      if (get_or<bool>(g, "include_zero", true, "selector.lambda_grid"))
        cfg.lambda_grid.insert(cfg.lambda_grid.begin(), 0.0);
    }
  }
  const std::string crit = get_or<std::string>(s, "criterion", "gcv", "selector");
  if (crit == "gcv") {
    cfg.criterion = Criterion::Gcv;
  } else if (crit == "kfold") {
    cfg.criterion = Criterion::KFold;
  } else {
    config_fail("selector.criterion", "must be 'gcv' or 'kfold'");
  }
  cfg.criterion_folds = get_or<int>(s, "folds", 5, "selector");
  if (s.contains("candidates")) {
    const json& c = s.at("candidates");
    if (!c.is_array() || c.empty()) config_fail("selector.candidates", "must be a non-empty array");
    for (const auto& m : c) {
      allow_keys(m, "selector.candidates[]", {"id", "columns"});
      CandidateRef ref;
      ref.id = get_or<int>(m, "id", static_cast<int>(cfg.candidates.size()) + 1, "selector.candidates[]");
      if (!m.contains("columns") || !m.at("columns").is_array())
        config_fail("selector.candidates[]", "needs a 'columns' array");
      for (const auto& col : m.at("columns")) ref.columns.push_back(col);
      cfg.candidates.push_back(std::move(ref));
    }
  }
  SelectorConfig probe;
  probe.lambda_grid = cfg.lambda_grid;
  probe.candidates = {CandidateModel{0, {0}}};
  probe.criterion = cfg.criterion;
  probe.cv_folds = cfg.criterion_folds;
  try {
    validate_selector(probe, 1);
  } catch (const Error& e) {
    config_fail("selector", e.what());
  }
}

void parse_study(const json& s, RunConfig& cfg) {
  allow_keys(s, "simulate", {"n", "true_model", "noise_sd", "reps", "bootstrap_size", "sigma2", "gamma",
                             "lambda_grid", "criterion", "folds", "svg"});
  StudyConfig& st = cfg.study;
  st.n = get_or<Index>(s, "n", 30, "simulate");
  st.true_model = get_or<int>(s, "true_model", 2, "simulate");
  st.noise_sd = get_or<double>(s, "noise_sd", 5.0, "simulate");
  st.reps = get_or<int>(s, "reps", 100, "simulate");
  st.bootstrap_size = get_or<Index>(s, "bootstrap_size", 200, "simulate");
  if (s.contains("sigma2")) st.sigma2_sweep = real_list(s.at("sigma2"), "simulate.sigma2");
  if (s.contains("gamma")) st.gamma_sweep = real_list(s.at("gamma"), "simulate.gamma");
  if (s.contains("lambda_grid")) st.lambda_grid = real_list(s.at("lambda_grid"), "simulate.lambda_grid");
  const std::string crit = get_or<std::string>(s, "criterion", "gcv", "simulate");
  if (crit != "gcv" && crit != "kfold") config_fail("simulate.criterion", "must be 'gcv' or 'kfold'");
  st.criterion = crit == "gcv" ? Criterion::Gcv : Criterion::KFold;
  st.cv_folds = get_or<int>(s, "folds", 5, "simulate");
  cfg.study_svg = get_or<bool>(s, "svg", false, "simulate");
}

RunConfig parse_config(std::string_view text, std::string_view command) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, std::string("config is not valid JSON: ") + e.what());
  }
  allow_keys(root, "config", {"seed", "threads", "alpha", "out", "model", "data", "selector", "bootstrap",
                              "resampling", "cv", "sweep", "simulate"});
  RunConfig cfg;
  if (root.contains("seed")) {
    const json& s = root.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      config_fail("seed", "must be a non-negative integer");
    cfg.seed = s.get<std::uint64_t>();
  }
  const long long threads = get_or<long long>(root, "threads", 1, "config");
  if (threads < 1 || threads > 1024) config_fail("threads", "must lie in 1..1024");
  cfg.threads = static_cast<unsigned>(threads);
  cfg.alpha = get_or<double>(root, "alpha", 0.05, "config");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) config_fail("alpha", "must lie in (0, 1)");
  cfg.out = get_or<std::string>(root, "out", ".", "config");
  cfg.model_path = get_or<std::string>(root, "model", "", "config");

  if (command == "simulate") {
    parse_study(root.value("simulate", json::object()), cfg);
    cfg.study.master_seed = cfg.seed;
    try {
      cfg.study = normalized(cfg.study);
    } catch (const Error& e) {
      config_fail("simulate", e.what());
    }
    return cfg;
  }

  if (!root.contains("data")) config_fail("data", "section is required");
  parse_data(root.at("data"), cfg);
  parse_selector(root.value("selector", json::object()), cfg);

  const json b = root.value("bootstrap", json::object());
  allow_keys(b, "bootstrap", {"size"});
  cfg.bootstrap_size = get_or<Index>(b, "size", 500, "bootstrap");
  if (cfg.bootstrap_size < 1) config_fail("bootstrap.size", "must be >= 1");

  const json r = root.value("resampling", json::object());
  allow_keys(r, "resampling", {"mode", "sigma2", "gamma"});
  const std::string mode = get_or<std::string>(r, "mode", "cv", "resampling");
  if (mode == "cv") {
    cfg.resampling = ResamplingMode::Cv;
  } else if (mode == "fixed") {
    cfg.resampling = ResamplingMode::Fixed;
    if (!r.contains("sigma2")) config_fail("resampling.sigma2", "is required in fixed mode");
    cfg.fixed_dist = {get_or<double>(r, "gamma", 1.0, "resampling"), get_or<double>(r, "sigma2", 1.0, "resampling")};
    try {
      validate_distribution(cfg.fixed_dist);
    } catch (const Error& e) {
      config_fail("resampling", e.what());
    }
  } else if (mode == "unbiased") {
    cfg.resampling = ResamplingMode::Unbiased;
  } else {
    config_fail("resampling.mode", "must be 'cv', 'fixed' or 'unbiased'");
  }

  const json c = root.value("cv", json::object());
  allow_keys(c, "cv", {"folds", "inner_size", "sigma2", "gamma", "fold_mode", "ols"});
  cfg.cv_folds = get_or<int>(c, "folds", 5, "cv");
  if (cfg.cv_folds < 2) config_fail("cv.folds", "must be >= 2");
  if (c.contains("inner_size")) {
    cfg.cv_inner_size = get_or<Index>(c, "inner_size", 1, "cv");
    if (*cfg.cv_inner_size < 1) config_fail("cv.inner_size", "must be >= 1");
  }
  if (c.contains("sigma2")) {
    const json& s = c.at("sigma2");
    if (s.is_array()) {
      cfg.cv_sigma2 = real_list(s, "cv.sigma2");
      for (double v : *cfg.cv_sigma2)
        if (!(v > 0.0)) config_fail("cv.sigma2", "values must be > 0");
    } else {
      allow_keys(s, "cv.sigma2", {"count"});
      cfg.cv_sigma2_count = get_or<int>(s, "count", 50, "cv.sigma2");
      if (cfg.cv_sigma2_count < 1) config_fail("cv.sigma2.count", "must be >= 1");
    }
  }
  if (c.contains("gamma")) {
    cfg.cv_gamma = real_list(c.at("gamma"), "cv.gamma");
    for (double g : cfg.cv_gamma)
      if (!(g >= 0.0 && g <= 1.0)) config_fail("cv.gamma", "values must lie in [0, 1]");
  }
  const std::string fm = get_or<std::string>(c, "fold_mode", "random", "cv");
  if (fm != "random" && fm != "contiguous") config_fail("cv.fold_mode", "must be 'random' or 'contiguous'");
  cfg.fold_mode = fm == "random" ? FoldMode::Random : FoldMode::Contiguous;
  const std::string ols = get_or<std::string>(c, "ols", "per_fold", "cv");
  if (ols != "per_fold" && ols != "global") config_fail("cv.ols", "must be 'per_fold' or 'global'");
  cfg.ols_source = ols == "per_fold" ? OlsSource::PerFold : OlsSource::Global;

  const json sw = root.value("sweep", json::object());
  allow_keys(sw, "sweep", {"sigma2", "gamma"});
  if (sw.contains("sigma2")) {
    cfg.sweep_sigma2 = real_list(sw.at("sigma2"), "sweep.sigma2");
    for (double v : cfg.sweep_sigma2)
      if (!(v >= 0.0)) config_fail("sweep.sigma2", "values must be >= 0");
  }
  cfg.sweep_gamma = get_or<double>(sw, "gamma", 1.0, "sweep");
  if (!(cfg.sweep_gamma >= 0.0 && cfg.sweep_gamma <= 1.0)) config_fail("sweep.gamma", "must lie in [0, 1]");
  if (command == "sweep-sigma" && cfg.sweep_sigma2.empty()) config_fail("sweep.sigma2", "is required");
  return cfg;
}

// ---------------------------------------------------------------------------
// Training windows

struct Window {
  std::string label;
  Dataset train;
  SelectorConfig selector;
  Matrix target_x;
  Vector target_truth;
  std::vector<std::string> target_labels;
  std::vector<std::string> target_days;
  std::vector<int> target_hours;
};

std::vector<CandidateModel> resolve_candidates(const RunConfig& cfg, const std::vector<std::string>& names) {
  if (cfg.candidates.empty()) return {full_model(static_cast<Index>(names.size()), 1)};
  std::vector<CandidateModel> out;
  for (const auto& ref : cfg.candidates) {
    CandidateModel m{ref.id, {}};
    for (const auto& col : ref.columns) {
      if (col.is_string()) {
        const auto it = std::find(names.begin(), names.end(), col.get<std::string>());
        if (it == names.end()) config_fail("selector.candidates", "unknown column '" + col.get<std::string>() + "'");
        m.columns.push_back(static_cast<Index>(it - names.begin()));
      } else if (col.is_number_integer()) {
        const long long k = col.get<long long>();
        if (k < 1 || k > static_cast<long long>(names.size()))
          config_fail("selector.candidates", "column position " + std::to_string(k) + " out of range");
        m.columns.push_back(static_cast<Index>(k - 1));
      } else {
        config_fail("selector.candidates", "columns must be names or 1-based positions");
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

SelectorConfig make_selector(const RunConfig& cfg, std::vector<CandidateModel> candidates, Index p) {
  SelectorConfig sel;
  sel.candidates = std::move(candidates);
  sel.lambda_grid = cfg.lambda_grid;
  sel.criterion = cfg.criterion;
  sel.cv_folds = cfg.criterion_folds;
  try {
    validate_selector(sel, p);
  } catch (const Error& e) {
    config_fail("selector", e.what());
  }
  return sel;
}

Dataset load_matrix_training(const RunConfig& cfg) {
  MatrixTable train = read_matrix_csv(cfg.train_csv);
  return Dataset(std::move(train.x), std::move(train.y), std::move(train.feature_names));
}

std::vector<Window> build_windows(const RunConfig& cfg, bool need_targets) {
  std::vector<Window> windows;
  if (cfg.kind == DataKind::Matrix) {
    Dataset train = load_matrix_training(cfg);
    SelectorConfig sel = make_selector(cfg, resolve_candidates(cfg, train.column_names()), train.p());
    Window w{"matrix", std::move(train), std::move(sel), {}, {}, {}, {}, {}};
    if (need_targets) {
      if (cfg.targets_csv.empty()) config_fail("data.targets", "is required for this command");
      MatrixTable targets = read_matrix_csv(cfg.targets_csv, true);
      if (targets.feature_names != w.train.column_names())
        fail(ErrorCode::Ingestion, cfg.targets_csv.string() + ": feature columns differ from the training file");
      w.target_x = std::move(targets.x);
      w.target_truth = std::move(targets.y);
      for (Index r = 0; r < w.target_x.rows(); ++r) {
        w.target_labels.push_back("row" + std::to_string(r + 1));
        w.target_days.emplace_back();
        w.target_hours.push_back(0);
      }
    }
    windows.push_back(std::move(w));
    return windows;
  }

  const DemandTable demand = read_demand_csv(cfg.demand_csv);
  const TemperatureTable temps = read_temperature_csv(cfg.temperature_csv);
  std::vector<int> hours(24);
  for (int h = 0; h < 24; ++h) hours[static_cast<std::size_t>(h)] = h + 1;
  for (Day target : cfg.target_days) {
    const auto days = training_window(target, cfg.window_days, cfg.same_weekday);
    std::vector<Day> span_days = days;
    span_days.push_back(target);
    const auto [lo, hi] = temperature_domain(temps, span_days, cfg.temp_padding);
    std::vector<DemandModelSpec> specs;
    for (const auto& size : cfg.demand_models)
      specs.push_back(make_demand_spec(size, lo, hi, cfg.hour_degree, cfg.temp_degree));
    DemandRows train_rows = assemble_demand_rows(demand, temps, specs, days, hours, true);
    DemandRows target_rows = assemble_demand_rows(demand, temps, specs, std::span(&target, 1), hours, false);
    const auto candidates = demand_candidates(specs);
    const CandidateModel* largest = &candidates.front();
    for (const auto& m : candidates)
      if (m.columns.size() >= largest->columns.size()) largest = &m;
    Dataset train = Dataset(std::move(train_rows.x), std::move(train_rows.y), std::move(train_rows.column_names))
                        .with_full_model(largest->columns);
    SelectorConfig sel = make_selector(cfg, candidates, train.p());
    Window w{format_iso_date(target), std::move(train), std::move(sel), std::move(target_rows.x),
             std::move(target_rows.y), {}, {}, {}};
    for (int h : hours) {
      w.target_labels.push_back(w.label + "T" + (h < 10 ? "0" : "") + std::to_string(h));
      w.target_days.push_back(w.label);
      w.target_hours.push_back(h);
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

// ---------------------------------------------------------------------------
// Fitting

CvGrid make_grid(const RunConfig& cfg, const Dataset& train, std::size_t window) {
  CvGrid grid;
  grid.sigma2_candidates = cfg.cv_sigma2 ? *cfg.cv_sigma2 : default_sigma2_candidates(train, cfg.cv_sigma2_count);
  grid.gamma_candidates = cfg.cv_gamma;
  grid.folds = cfg.cv_folds;
  grid.bootstrap_size = cfg.cv_inner_size.value_or(cfg.bootstrap_size);
  grid.seed = derive_seed(cfg.seed, {kCvStream, static_cast<std::uint64_t>(window)});
  grid.fold_mode = cfg.fold_mode;
  grid.ols_source = cfg.ols_source;
  return grid;
}

std::uint64_t fit_seed(const RunConfig& cfg, std::size_t window) {
  return derive_seed(cfg.seed, {kFitStream, static_cast<std::uint64_t>(window)});
}

struct WindowOutcome {
  ResamplingDistribution dist;
  std::optional<CvSurface> surface;
  std::vector<ReportRow> rows;
  PbsFit fit;
};

WindowOutcome fit_window(const RunConfig& cfg, const Window& w, std::size_t index,
                         const std::optional<ResamplingDistribution>& fixed) {
  WindowOutcome out;
  const FitResult ols = ols_fit(w.train);
  const double sigma2_ub = unbiased_variance(w.train, ols);
  if (fixed) {
    out.dist = *fixed;
  } else if (cfg.resampling == ResamplingMode::Fixed) {
    out.dist = cfg.fixed_dist;
  } else if (cfg.resampling == ResamplingMode::Unbiased) {
    out.dist = {1.0, sigma2_ub};
  } else {
    out.surface = cv_error_surface(w.train, make_grid(cfg, w.train, index), w.selector, cfg.threads);
    out.dist = out.surface->selected;
  }

  PbsOptions options;
  options.threads = cfg.threads;
  options.store_responses = false;
  const PreparedSelector prepared(w.train.x(), w.selector);
  out.fit = pbs_fit(w.train, prepared, resampling_mean(w.train, ols, out.dist.gamma), out.dist,
                    cfg.bootstrap_size, fit_seed(cfg, index), options);

  const FitResult ridge = prepared.select(w.train.y());
  const auto model_it = std::find_if(w.selector.candidates.begin(), w.selector.candidates.end(),
                                     [&](const CandidateModel& m) { return m.id == ridge.model_id; });

  for (Index r = 0; r < w.target_x.rows(); ++r) {
    const Vector x_new = w.target_x.row(r).transpose();
    ReportRow row;
    row.target = w.target_labels[static_cast<std::size_t>(r)];
    row.day = w.target_days[static_cast<std::size_t>(r)];
    row.hour = w.target_hours[static_cast<std::size_t>(r)];
    row.truth = w.target_truth(r);
    const PredictionInterval pi = out.dist.sigma2 > 0.0
                                      ? prediction_interval(out.fit, w.train, x_new, cfg.alpha)
                                      : make_interval(pbs_predict(out.fit, x_new), 0.0,
                                                      residual_variance_pbs(out.fit, w.train), cfg.alpha);
    row.pbs_pred = pi.center;
    row.pbs_lower = pi.lower();
    row.pbs_upper = pi.upper();
    row.pbs_smoothing_var = pi.smoothing_variance;
    row.pbs_residual_var = pi.residual_variance;
    const PredictionInterval ri =
        ridge_prediction_interval(w.train, *model_it, ridge, x_new, cfg.alpha, sigma2_ub);
    row.ridge_pred = ri.center;
    row.ridge_lower = ri.lower();
    row.ridge_upper = ri.upper();
    row.sigma2 = out.dist.sigma2;
    row.gamma = out.dist.gamma;
    out.rows.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output

std::string truth_field(double v) { return std::isnan(v) ? "NA" : format_real(v); }

void write_report_csv(const fs::path& path, const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "target,day,hour,truth,pbs_pred,pbs_lower,pbs_upper,pbs_smoothing_var,pbs_residual_var,"
         "ridge_pred,ridge_lower,ridge_upper,sigma2,gamma\n";
  for (const auto& r : rows) {
    out << r.target << ',' << r.day << ',' << (r.hour ? std::to_string(r.hour) : "") << ','
        << truth_field(r.truth) << ',' << format_real(r.pbs_pred) << ',' << format_real(r.pbs_lower) << ','
        << format_real(r.pbs_upper) << ',' << format_real(r.pbs_smoothing_var) << ','
        << format_real(r.pbs_residual_var) << ',' << format_real(r.ridge_pred) << ','
        << format_real(r.ridge_lower) << ',' << format_real(r.ridge_upper) << ',' << format_real(r.sigma2)
        << ',' << format_real(r.gamma) << '\n';
  }
  write_text_file(path, out.str());
}

ojson accuracy_json(const Accuracy& a) {
  ojson j;
  j["scored"] = a.scored;
  j["mspe"] = a.scored ? ojson(a.mspe) : ojson(nullptr);
  j["coverage"] = a.scored ? ojson(a.coverage) : ojson(nullptr);
  return j;
}

void ensure_out_dir(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) fail(ErrorCode::Io, "cannot create output directory " + out.string() + ": " + ec.message());
}

std::string surface_name(const Window& w, std::size_t windows) {
  return windows == 1 && w.label == "matrix" ? "surface.csv" : "surface_" + w.label + ".csv";
}

std::string write_surface(const fs::path& out, const Window& w, std::size_t windows, const CvSurface& s) {
  const std::string name = surface_name(w, windows);
  std::ostringstream csv;
  write_surface_csv(s, csv);
  write_text_file(out / name, csv.str());
  return name;
}

// FNV-1a over the bytes of X and y.
std::string fingerprint(const Dataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&](const double* p, Index count) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < static_cast<std::size_t>(count) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ull;
    }
  };
  mix(data.x().data(), data.x().size());
  mix(data.y().data(), data.y().size());
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ojson vector_json(const Vector& v) {
  ojson arr = ojson::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Vector json_vector(const json& arr, Index expected, const std::string& where) {
  if (!arr.is_array() || static_cast<Index>(arr.size()) != expected)
    fail(ErrorCode::Ingestion, where + " has the wrong length");
  Vector v(expected);
  for (Index i = 0; i < expected; ++i) v(i) = arr.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

void write_model_json(const fs::path& path, const Window& w, const WindowOutcome& o, const RunConfig& cfg) {
  ojson m;
  m["format"] = kModelFormat;
  m["n"] = w.train.n();
  m["p"] = w.train.p();
  m["fingerprint"] = fingerprint(w.train);
  m["feature_names"] = w.train.column_names();
  m["distribution"] = {{"sigma2", o.dist.sigma2}, {"gamma", o.dist.gamma}};
  m["bootstrap_size"] = o.fit.bootstrap_size();
  m["seed"] = fit_seed(cfg, 0);
  m["beta_pbs"] = vector_json(o.fit.beta_pbs);
  m["ybar_star"] = vector_json(o.fit.ybar_star);
  ojson rows = ojson::array();
  for (Index r = 0; r < o.fit.comoment.rows(); ++r) rows.push_back(vector_json(o.fit.comoment.row(r).transpose()));
  m["comoment"] = std::move(rows);
  write_text_file(path, m.dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// Commands

std::string cmd_fit(const RunConfig& cfg) {
  ensure_out_dir(cfg.out);
  const auto windows = build_windows(cfg, true);
  std::vector<ReportRow> rows;
  ojson window_summaries = ojson::array();
  for (std::size_t w = 0; w < windows.size(); ++w) {
    WindowOutcome o = fit_window(cfg, windows[w], w, std::nullopt);
    ojson ws;
    ws["window"] = windows[w].label;
    ws["train_rows"] = windows[w].train.n();
    ws["p"] = windows[w].train.p();
    ws["sigma2"] = o.dist.sigma2;
    ws["gamma"] = o.dist.gamma;
    ws["surface"] = o.surface ? ojson(write_surface(cfg.out, windows[w], windows.size(), *o.surface))
                              : ojson(nullptr);
    window_summaries.push_back(std::move(ws));
    if (cfg.kind == DataKind::Matrix) write_model_json(cfg.out / "model.json", windows[w], o, cfg);
    rows.insert(rows.end(), o.rows.begin(), o.rows.end());
  }
  write_report_csv(cfg.out / "report.csv", rows);

  const Accuracy pa = pbs_accuracy(rows), ra = ridge_accuracy(rows);
  ojson summary;
  summary["command"] = "fit";
  summary["targets"] = rows.size();
  summary["alpha"] = cfg.alpha;
  summary["bootstrap_size"] = cfg.bootstrap_size;
  summary["seed"] = cfg.seed;
  summary["pbs"] = accuracy_json(pa);
  summary["ridge"] = accuracy_json(ra);
  summary["windows"] = std::move(window_summaries);
  write_text_file(cfg.out / "summary.json", summary.dump(2) + "\n");

  std::ostringstream msg;
  msg << "fit: " << rows.size() << " targets";
  if (pa.scored) msg << ", pbs mspe " << pa.mspe << ", ridge mspe " << ra.mspe;
  return msg.str();
}

std::string cmd_predict(const RunConfig& cfg) {
  if (cfg.kind != DataKind::Matrix) config_fail("predict", "is available in matrix mode only");
  ensure_out_dir(cfg.out);
  const fs::path model_path = cfg.model_path.empty() ? cfg.out / "model.json" : cfg.model_path;
  json m;
  try {
    m = json::parse(read_text_file(model_path));
  } catch (const json::exception& e) {
    fail(ErrorCode::Ingestion, model_path.string() + ": " + e.what());
  }
  if (m.value("format", "") != kModelFormat) fail(ErrorCode::Ingestion, model_path.string() + ": not a model file");

  const auto windows = build_windows(cfg, true);
  const Window& w = windows.front();
  try {
    if (m.at("fingerprint").get<std::string>() != fingerprint(w.train))
      fail(ErrorCode::Ingestion, model_path.string() + ": training data differs from the data the model was fitted on");
    PbsFit fit;
    fit.distribution = {m.at("distribution").at("gamma").get<double>(), m.at("distribution").at("sigma2").get<double>()};
    fit.seed = m.at("seed").get<std::uint64_t>();
    fit.beta_pbs = json_vector(m.at("beta_pbs"), w.train.p(), "beta_pbs");
    fit.ybar_star = json_vector(m.at("ybar_star"), w.train.n(), "ybar_star");
    const json& rows = m.at("comoment");
    if (!rows.is_array() || static_cast<Index>(rows.size()) != w.train.n())
      fail(ErrorCode::Ingestion, "comoment has the wrong row count");
    fit.comoment.resize(w.train.n(), w.train.p());
    for (Index r = 0; r < w.train.n(); ++r)
      fit.comoment.row(r) = json_vector(rows.at(static_cast<std::size_t>(r)), w.train.p(), "comoment row").transpose();

    std::ostringstream csv;
    csv << "target,truth,pbs_pred,pbs_lower,pbs_upper\n";
    for (Index r = 0; r < w.target_x.rows(); ++r) {
      const Vector x_new = w.target_x.row(r).transpose();
      const PredictionInterval pi = fit.distribution.sigma2 > 0.0
                                        ? prediction_interval(fit, w.train, x_new, cfg.alpha)
                                        : make_interval(pbs_predict(fit, x_new), 0.0,
                                                        residual_variance_pbs(fit, w.train), cfg.alpha);
      csv << w.target_labels[static_cast<std::size_t>(r)] << ',' << truth_field(w.target_truth(r)) << ','
          << format_real(pi.center) << ',' << format_real(pi.lower()) << ',' << format_real(pi.upper()) << '\n';
    }
    write_text_file(cfg.out / "predictions.csv", csv.str());
  } catch (const json::exception& e) {
    fail(ErrorCode::Ingestion, model_path.string() + ": " + e.what());
  }
  return "predict: " + std::to_string(w.target_x.rows()) + " targets";
}

std::string cmd_select_dist(const RunConfig& cfg) {
  ensure_out_dir(cfg.out);
  const auto windows = build_windows(cfg, false);
  ojson selections = ojson::array();
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const CvSurface s = cv_error_surface(windows[w].train, make_grid(cfg, windows[w].train, w),
                                         windows[w].selector, cfg.threads);
    ojson entry;
    entry["window"] = windows[w].label;
    entry["sigma2"] = s.selected.sigma2;
    entry["gamma"] = s.selected.gamma;
    entry["surface"] = write_surface(cfg.out, windows[w], windows.size(), s);
    selections.push_back(std::move(entry));
  }
  ojson doc;
  doc["command"] = "select-dist";
  doc["seed"] = cfg.seed;
  doc["selections"] = std::move(selections);
  write_text_file(cfg.out / "selection.json", doc.dump(2) + "\n");
  return "select-dist: " + std::to_string(windows.size()) + " surface(s)";
}

std::string cmd_sweep_sigma(const RunConfig& cfg) {
  ensure_out_dir(cfg.out);
  const auto windows = build_windows(cfg, true);
  std::ostringstream csv;
  csv << "sigma2,gamma,mspe,coverage,scored\n";
  for (double sigma2 : cfg.sweep_sigma2) {
    std::vector<ReportRow> rows;
    for (std::size_t w = 0; w < windows.size(); ++w) {
      auto o = fit_window(cfg, windows[w], w, ResamplingDistribution{cfg.sweep_gamma, sigma2});
      rows.insert(rows.end(), o.rows.begin(), o.rows.end());
    }
    const Accuracy a = pbs_accuracy(rows);
    if (a.scored == 0) fail(ErrorCode::Ingestion, "sweep-sigma needs targets with known truth");
    csv << format_real(sigma2) << ',' << format_real(cfg.sweep_gamma) << ',' << format_real(a.mspe) << ','
        << format_real(a.coverage) << ',' << a.scored << '\n';
  }
  write_text_file(cfg.out / "sweep.csv", csv.str());
  return "sweep-sigma: " + std::to_string(cfg.sweep_sigma2.size()) + " points";
}

std::string cmd_simulate(const RunConfig& cfg) {
  ensure_out_dir(cfg.out);
  const StudyResult result = run_study(cfg.study, cfg.threads);
  write_study_csvs(result, cfg.out / "study_mse.csv", cfg.out / "study_freq.csv");
  if (cfg.study_svg) write_text_file(cfg.out / "study_mse.svg", study_mse_svg(result));
  const auto best = std::min_element(result.cells.begin(), result.cells.end(),
                                     [](const StudyCell& a, const StudyCell& b) { return a.mse < b.mse; });
  std::ostringstream msg;
  msg << "simulate: best pbs mse " << best->mse << " at sigma2=" << best->sigma2 << ", gamma=" << best->gamma
      << "; ridge-gcv mse " << result.ridge_baseline_mse;
  return msg.str();
}

Accuracy accuracy_of(const std::vector<ReportRow>& rows, bool pbs) {
  Accuracy a;
  double se = 0.0, covered = 0.0;
  for (const auto& r : rows) {
    if (std::isnan(r.truth)) continue;
    ++a.scored;
    const double pred = pbs ? r.pbs_pred : r.ridge_pred;
    const double lo = pbs ? r.pbs_lower : r.ridge_lower;
    const double hi = pbs ? r.pbs_upper : r.ridge_upper;
    se += (r.truth - pred) * (r.truth - pred);
    if (lo <= r.truth && r.truth <= hi) covered += 1.0;
  }
  if (a.scored) {
    a.mspe = se / static_cast<double>(a.scored);
    a.coverage = covered / static_cast<double>(a.scored);
  }
  return a;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"fit", "predict", "select-dist", "sweep-sigma", "simulate"};
  return names;
}

std::string run_command(std::string_view command, std::string_view config_json) {
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), command) == names.end())
    fail(ErrorCode::Config, "unknown command '" + std::string(command) + "'");
  const RunConfig cfg = parse_config(config_json, command);
  if (command == "fit") return cmd_fit(cfg);
  if (command == "predict") return cmd_predict(cfg);
  if (command == "select-dist") return cmd_select_dist(cfg);
  if (command == "sweep-sigma") return cmd_sweep_sigma(cfg);
  return cmd_simulate(cfg);
}

std::vector<ReportRow> read_report_csv(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::size_t line_no = 1;
  auto bad = [&](const std::string& what) {
    fail(ErrorCode::Ingestion, path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  if (!std::getline(in, line)) bad("missing header");
  if (split_csv_line(line).size() != 14) bad("unexpected header");
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 14) bad("expected 14 fields");
    ReportRow r;
    r.target = f[0];
    r.day = f[1];
    if (!f[2].empty()) {
      const auto h = parse_integer(f[2]);
      if (!h) bad("bad hour");
      r.hour = static_cast<int>(*h);
    }
    auto num = [&](const std::string& s) {
      const auto v = parse_real(s);
      if (!v) bad("bad number '" + s + "'");
      return *v;
    };
    r.truth = f[3] == "NA" ? std::nan("") : num(f[3]);
    r.pbs_pred = num(f[4]);
    r.pbs_lower = num(f[5]);
    r.pbs_upper = num(f[6]);
    r.pbs_smoothing_var = num(f[7]);
    r.pbs_residual_var = num(f[8]);
    r.ridge_pred = num(f[9]);
    r.ridge_lower = num(f[10]);
    r.ridge_upper = num(f[11]);
    r.sigma2 = num(f[12]);
    r.gamma = num(f[13]);
    rows.push_back(std::move(r));
  }
  return rows;
}

Accuracy pbs_accuracy(const std::vector<ReportRow>& rows) { return accuracy_of(rows, true); }
Accuracy ridge_accuracy(const std::vector<ReportRow>& rows) { return accuracy_of(rows, false); }

}  // namespace pbs::app
