#include "pbs/simulation.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "pbs/bootstrap.hpp"
#include "pbs/csv.hpp"
#include "pbs/error.hpp"
#include "pbs/parallel.hpp"
#include "pbs/rng.hpp"
#include "pbs/selector.hpp"

namespace pbs {

namespace {

struct RepOutcome {
  std::vector<double> squared_error;
  std::vector<std::array<double, kStudyModels>> freq;
  double ridge_squared_error = 0.0;
};

SelectorConfig study_selector(const StudyConfig& cfg) {
  SelectorConfig sel;
  sel.candidates = nested_candidates();
  sel.lambda_grid = cfg.lambda_grid;
  sel.criterion = cfg.criterion;
  sel.cv_folds = cfg.cv_folds;
  return sel;
}

RepOutcome run_replication(const StudyConfig& cfg, const SelectorConfig& selector, int rep) {
  const RepSeeds seeds = replication_seeds(cfg.master_seed, rep);
  const Matrix features = generate_design(cfg.n, kStudyFeatures, seeds.design);
  const Vector y = generate_response(features, cfg.true_model, cfg.noise_sd, seeds.response);
  const Dataset data(with_intercept(features), y);
  const Vector truth = true_coefficients(cfg.true_model);

  const FitResult ols = ols_fit(data);
  const PreparedSelector prepared(data.x(), selector);
  const std::array<int, kStudyModels> ids{1, 2, 3, 4};

  RepOutcome out;
  PbsOptions options;
  options.store_responses = false;
  for (double sigma2 : cfg.sigma2_sweep) {
    for (double gamma : cfg.gamma_sweep) {
      const ResamplingDistribution dist{gamma, sigma2};
      const PbsFit fit = pbs_fit(data, prepared, resampling_mean(data, ols, gamma), dist,
                                 cfg.bootstrap_size, seeds.bootstrap, options);
      out.squared_error.push_back((fit.beta_pbs - truth).squaredNorm());
      const auto freq = selection_frequencies(fit, ids);
      std::array<double, kStudyModels> f{};
      std::copy(freq.begin(), freq.end(), f.begin());
      out.freq.push_back(f);
    }
  }
  out.ridge_squared_error = (prepared.select(y).coefficients - truth).squaredNorm();
  return out;
}

[[noreturn]] void study_csv_fail(const std::filesystem::path& path, std::size_t line,
                                 const std::string& what) {
  fail(ErrorCode::Ingestion, path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

std::vector<double> default_sigma2_sweep() {
  std::vector<double> out;
  for (int k = 0; k <= 45; ++k) {
    const double sd = 1.0 + 0.2 * k;
    out.push_back(sd * sd);
  }
  return out;
}

std::vector<double> default_gamma_sweep() { return {0.0, 0.2, 0.5, 1.0}; }

StudyConfig normalized(StudyConfig config) {
  if (config.sigma2_sweep.empty()) config.sigma2_sweep = default_sigma2_sweep();
  if (config.gamma_sweep.empty()) config.gamma_sweep = default_gamma_sweep();
  if (config.lambda_grid.empty()) config.lambda_grid = default_lambda_grid();
  validate_study(config);
  return config;
}

void validate_study(const StudyConfig& config) {
  if (config.n <= kStudyFeatures + 1)
    fail(ErrorCode::InvalidArgument, "study needs n > 21 so the intercept and 20 features are estimable");
  if (config.true_model < 1 || config.true_model > kStudyModels)
    fail(ErrorCode::InvalidArgument, "true model must be 1..4");
  if (!(config.noise_sd >= 0.0) || !std::isfinite(config.noise_sd))
    fail(ErrorCode::InvalidArgument, "noise_sd must be finite and >= 0");
  if (config.reps < 1) fail(ErrorCode::InvalidArgument, "reps must be >= 1");
  if (config.bootstrap_size < 1) fail(ErrorCode::InvalidArgument, "bootstrap size must be >= 1");
  for (double s : config.sigma2_sweep)
    if (!(s >= 0.0) || !std::isfinite(s)) fail(ErrorCode::InvalidArgument, "sigma2 sweep values must be >= 0");
  for (double g : config.gamma_sweep)
    if (!(g >= 0.0 && g <= 1.0)) fail(ErrorCode::InvalidArgument, "gamma sweep values must lie in [0, 1]");
  SelectorConfig sel;
  sel.candidates = nested_candidates();
  sel.lambda_grid = config.lambda_grid;
  sel.criterion = config.criterion;
  sel.cv_folds = config.cv_folds;
  validate_selector(sel, kStudyFeatures + 1);
}

Matrix generate_design(Index n, Index p, std::uint64_t seed) {
  if (n < 1 || p < 1) fail(ErrorCode::InvalidArgument, "design needs n, p >= 1");
  CounterStream stream(seed);
  Matrix x(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < p; ++c) x(i, c) = stream.uniform(-5.0, 5.0);
  return x;
}

Vector generate_response(const Matrix& x, int true_model, double noise_sd, std::uint64_t seed) {
  if (x.cols() != kStudyFeatures) fail(ErrorCode::InvalidArgument, "study design must have 20 columns");
  if (true_model < 1 || true_model > kStudyModels) fail(ErrorCode::InvalidArgument, "true model must be 1..4");
  const Index active = 5 * true_model;
  CounterStream stream(seed);
  Vector y(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    double v = 1.0;
    for (Index c = 0; c < active; ++c) v += x(i, c);
    y(i) = v + noise_sd * stream.normal();
  }
  return y;
}

Vector true_coefficients(int true_model) {
  if (true_model < 1 || true_model > kStudyModels) fail(ErrorCode::InvalidArgument, "true model must be 1..4");
  Vector beta = Vector::Zero(kStudyFeatures + 1);
  beta(0) = 1.0;
  beta.segment(1, 5 * true_model).setOnes();
  return beta;
}

Matrix with_intercept(const Matrix& x) {
  Matrix out(x.rows(), x.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(x.cols()) = x;
  return out;
}

std::vector<CandidateModel> nested_candidates() {
  std::vector<CandidateModel> out;
  for (int j = 1; j <= kStudyModels; ++j) {
    CandidateModel m{j, {0}};
    for (Index c = 1; c <= 5 * j; ++c) m.columns.push_back(c);
    out.push_back(std::move(m));
  }
  return out;
}

RepSeeds replication_seeds(std::uint64_t master_seed, int rep) noexcept {
  const auto r = static_cast<std::uint64_t>(rep);
  return {derive_seed(master_seed, {r, 0}), derive_seed(master_seed, {r, 1}),
          derive_seed(master_seed, {r, 2})};
}

StudyResult run_study(const StudyConfig& config, unsigned threads) {
  const StudyConfig cfg = normalized(config);
  const SelectorConfig selector = study_selector(cfg);
  std::vector<RepOutcome> outcomes(static_cast<std::size_t>(cfg.reps));
  parallel_for(outcomes.size(), threads, [&](std::size_t rep) {
    outcomes[rep] = run_replication(cfg, selector, static_cast<int>(rep));
  });

  StudyResult result;
  result.gamma_count = cfg.gamma_sweep.size();
  for (double s : cfg.sigma2_sweep)
    for (double g : cfg.gamma_sweep) result.cells.push_back({s, g, 0.0, {}});
  for (const auto& o : outcomes) {
    for (std::size_t c = 0; c < result.cells.size(); ++c) {
      result.cells[c].mse += o.squared_error[c];
      for (int m = 0; m < kStudyModels; ++m) result.cells[c].selection_freq[m] += o.freq[c][m];
    }
    result.ridge_baseline_mse += o.ridge_squared_error;
  }
  const double reps = static_cast<double>(cfg.reps);
  for (auto& cell : result.cells) {
    cell.mse /= reps;
    for (auto& f : cell.selection_freq) f /= reps;
  }
  result.ridge_baseline_mse /= reps;
  return result;
}

void write_study_csvs(const StudyResult& result, const std::filesystem::path& mse_path,
                      const std::filesystem::path& freq_path) {
  std::ostringstream mse, freq;
  mse << "sigma2,gamma,model_id,value\n";
  freq << "sigma2,gamma,model_id,value\n";
  for (const auto& cell : result.cells) {
    const std::string key = format_real(cell.sigma2) + ',' + format_real(cell.gamma) + ',';
    mse << key << "pbs," << format_real(cell.mse) << '\n';
    for (int m = 0; m < kStudyModels; ++m)
      freq << key << (m + 1) << ',' << format_real(cell.selection_freq[m]) << '\n';
  }
  mse << ",,ridge_gcv," << format_real(result.ridge_baseline_mse) << '\n';
  write_text_file(mse_path, mse.str());
  write_text_file(freq_path, freq.str());
}

StudyResult read_study_csvs(const std::filesystem::path& mse_path,
                            const std::filesystem::path& freq_path) {
  StudyResult result;
  std::vector<double> gammas;
  {
    std::istringstream in(read_text_file(mse_path));
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"sigma2", "gamma", "model_id", "value"})
      study_csv_fail(mse_path, 1, "bad header");
    bool baseline = false;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto f = split_csv_line(line);
      if (f.size() != 4) study_csv_fail(mse_path, line_no, "expected 4 fields");
      const auto value = parse_real(f[3]);
      if (!value) study_csv_fail(mse_path, line_no, "bad value");
      if (f[2] == "ridge_gcv") {
        result.ridge_baseline_mse = *value;
        baseline = true;
        continue;
      }
      const auto s = parse_real(f[0]), g = parse_real(f[1]);
      if (f[2] != "pbs" || !s || !g) study_csv_fail(mse_path, line_no, "bad cell row");
      if (!result.cells.empty() && result.cells.front().sigma2 == *s) gammas.push_back(*g);
      if (result.cells.empty()) gammas.push_back(*g);
      result.cells.push_back({*s, *g, *value, {}});
    }
    if (!baseline) study_csv_fail(mse_path, line_no, "missing ridge_gcv row");
  }
  result.gamma_count = gammas.size();

  std::istringstream in(read_text_file(freq_path));
  std::string line;
  std::size_t line_no = 1;
  std::getline(in, line);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    const auto id = f.size() == 4 ? parse_integer(f[2]) : std::nullopt;
    const auto value = f.size() == 4 ? parse_real(f[3]) : std::nullopt;
    if (!id || !value || *id < 1 || *id > kStudyModels) study_csv_fail(freq_path, line_no, "bad row");
    const std::size_t cell = row / kStudyModels;
    if (cell >= result.cells.size()) study_csv_fail(freq_path, line_no, "more rows than cells");
    result.cells[cell].selection_freq[static_cast<std::size_t>(*id - 1)] = *value;
    ++row;
  }
  if (row != result.cells.size() * kStudyModels) study_csv_fail(freq_path, line_no, "row count mismatch");
  return result;
}

}  // namespace pbs
