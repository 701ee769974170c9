#include "pbs/model_core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "pbs/error.hpp"
#include "pbs/selector.hpp"

namespace pbs {

namespace {

Matrix columns_of(const Matrix& x, const std::vector<Index>& cols) {
  Matrix out(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = x.col(cols[k]);
  return out;
}

Vector solve_ridge(const Matrix& xj, const Vector& y, double lambda, const char* what) {
  Matrix gram = xj.transpose() * xj;
  gram.diagonal().array() += lambda;
  const ScaledCholesky chol(gram);
  if (chol.singular(lambda)) {
    std::ostringstream msg;
    msg << what << ": Gram matrix of " << xj.rows() << "x" << xj.cols()
        << " design is singular at lambda=" << lambda;
    if (xj.rows() < xj.cols()) msg << " (n=" << xj.rows() << " < p=" << xj.cols() << ")";
    fail(ErrorCode::Singular, msg.str());
  }
  return chol.solve(xj.transpose() * y);
}

Vector scatter(const Vector& local, const std::vector<Index>& cols, Index p) {
  Vector out = Vector::Zero(p);
  for (std::size_t k = 0; k < cols.size(); ++k) out(cols[k]) = local(static_cast<Index>(k));
  return out;
}

}  // namespace

ScaledCholesky::ScaledCholesky(const Matrix& a) : inv_scale_(a.rows()) {
  const Vector diag = a.diagonal();
  if (!(diag.array() > 0.0).all() || !diag.allFinite()) return;
  inv_scale_ = diag.cwiseSqrt().cwiseInverse();
  llt_.compute(inv_scale_.asDiagonal() * a * inv_scale_.asDiagonal());
  factored_ = llt_.info() == Eigen::Success;
  if (factored_) rcond_ = llt_.rcond();
}

Vector ScaledCholesky::solve(const Vector& rhs) const {
  if (!factored_) fail(ErrorCode::Singular, "solve with a failed Cholesky factorisation");
  return inv_scale_.asDiagonal() * llt_.solve(inv_scale_.asDiagonal() * rhs);
}

Matrix ScaledCholesky::solve_matrix(const Matrix& rhs) const {
  if (!factored_) fail(ErrorCode::Singular, "solve with a failed Cholesky factorisation");
  return inv_scale_.asDiagonal() * llt_.solve(inv_scale_.asDiagonal() * rhs);
}

Dataset::Dataset(Matrix x, Vector y, std::vector<std::string> column_names)
    : x_(std::move(x)), y_(std::move(y)), names_(std::move(column_names)) {
  if (x_.rows() < 1 || x_.cols() < 1)
    fail(ErrorCode::InvalidArgument, "dataset needs n >= 1 and p >= 1");
  if (x_.rows() != y_.size()) {
    std::ostringstream msg;
    msg << "design has " << x_.rows() << " rows but response has " << y_.size() << " entries";
    fail(ErrorCode::InvalidArgument, msg.str());
  }
  if (!x_.allFinite() || !y_.allFinite())
    fail(ErrorCode::InvalidArgument, "dataset contains non-finite entries");
  if (!names_.empty() && static_cast<Index>(names_.size()) != x_.cols())
    fail(ErrorCode::InvalidArgument, "column_names length does not match p");
}

Dataset Dataset::with_response(Vector y) const {
  Dataset out(x_, std::move(y), names_);
  out.full_ = full_;
  out.xf_ = xf_;
  return out;
}

Dataset Dataset::with_full_model(std::vector<Index> columns) const {
  validate_candidate({0, columns}, p());
  Dataset out(x_, y_, names_);
  out.xf_ = columns_of(x_, columns);
  out.full_ = std::move(columns);
  return out;
}

Dataset Dataset::rows(std::span<const Index> indices) const {
  Matrix xs(static_cast<Index>(indices.size()), p());
  Vector ys(static_cast<Index>(indices.size()));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const Index i = indices[r];
    if (i < 0 || i >= n()) fail(ErrorCode::InvalidArgument, "row index out of range");
    xs.row(static_cast<Index>(r)) = x_.row(i);
    ys(static_cast<Index>(r)) = y_(i);
  }
  Dataset out(std::move(xs), std::move(ys), names_);
  return full_.empty() ? out : out.with_full_model(full_);
}

void validate_candidate(const CandidateModel& model, Index p) {
  if (model.columns.empty())
    fail(ErrorCode::InvalidArgument, "candidate " + std::to_string(model.id) + " has no columns");
  std::set<Index> seen;
  for (Index c : model.columns) {
    if (c < 0 || c >= p)
      fail(ErrorCode::InvalidArgument, "candidate " + std::to_string(model.id) +
                                           " column " + std::to_string(c) + " out of range");
    if (!seen.insert(c).second)
      fail(ErrorCode::InvalidArgument,
           "candidate " + std::to_string(model.id) + " repeats column " + std::to_string(c));
  }
}

CandidateModel full_model(Index p, int id) {
  CandidateModel m{id, {}};
  m.columns.resize(static_cast<std::size_t>(p));
  for (Index c = 0; c < p; ++c) m.columns[static_cast<std::size_t>(c)] = c;
  return m;
}

void validate_selector(const SelectorConfig& config, Index p) {
  if (config.candidates.empty()) fail(ErrorCode::InvalidArgument, "selector has no candidates");
  std::set<int> ids;
  for (const auto& m : config.candidates) {
    validate_candidate(m, p);
    if (!ids.insert(m.id).second)
      fail(ErrorCode::InvalidArgument, "duplicate candidate id " + std::to_string(m.id));
  }
  if (config.lambda_grid.empty()) fail(ErrorCode::InvalidArgument, "lambda grid is empty");
  for (std::size_t l = 0; l < config.lambda_grid.size(); ++l) {
    const double v = config.lambda_grid[l];
    if (!std::isfinite(v) || v < 0.0)
      fail(ErrorCode::InvalidArgument, "lambda grid values must be finite and >= 0");
    if (l > 0 && !(config.lambda_grid[l - 1] < v))
      fail(ErrorCode::InvalidArgument, "lambda grid must be strictly ascending");
  }
  if (config.criterion == Criterion::KFold && config.cv_folds < 2)
    fail(ErrorCode::InvalidArgument, "k-fold criterion needs at least 2 folds");
}

std::vector<double> default_lambda_grid(int count, double lo, double hi) {
  std::vector<double> grid{0.0};
  if (count == 1) {
    grid.push_back(lo);
    return grid;
  }
  const double llo = std::log10(lo), lhi = std::log10(hi);
  for (int k = 0; k < count; ++k)
    grid.push_back(std::pow(10.0, llo + (lhi - llo) * k / (count - 1)));
  return grid;
}

std::vector<std::vector<Index>> contiguous_folds(Index n, int folds) {
  if (folds < 1 || folds > n) fail(ErrorCode::InvalidArgument, "fold count out of range");
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(folds));
  const Index base = n / folds, extra = n % folds;
  Index start = 0;
  for (int k = 0; k < folds; ++k) {
    const Index size = base + (k < extra ? 1 : 0);
    for (Index i = 0; i < size; ++i) out[static_cast<std::size_t>(k)].push_back(start + i);
    start += size;
  }
  return out;
}

FitResult ols_fit(const Dataset& data) {
  const Matrix& xf = data.full_x();
  if (data.n() < xf.cols()) {
    std::ostringstream msg;
    msg << "ols_fit: n=" << data.n() << " < p=" << xf.cols() << ", design cannot have full column rank";
    fail(ErrorCode::Singular, msg.str());
  }
  const Vector local = solve_ridge(xf, data.y(), 0.0, "ols_fit");
  FitResult fit;
  fit.coefficients = data.full_columns().empty() ? local : scatter(local, data.full_columns(), data.p());
  fit.model_id = -1;
  fit.lambda = 0.0;
  fit.residual_ss = (data.y() - xf * local).squaredNorm();
  return fit;
}

double unbiased_variance(const Dataset& data, const FitResult& ols) {
  if (data.n() <= data.full_p()) {
    std::ostringstream msg;
    msg << "unbiased variance needs n > p (n=" << data.n() << ", p=" << data.full_p() << ")";
    fail(ErrorCode::DegreesOfFreedom, msg.str());
  }
  return ols.residual_ss / static_cast<double>(data.n() - data.full_p());
}

FitResult ridge_fit(const Dataset& data, const CandidateModel& model, double lambda) {
  validate_candidate(model, data.p());
  if (!std::isfinite(lambda) || lambda < 0.0)
    fail(ErrorCode::InvalidArgument, "lambda must be finite and >= 0");
  const Matrix xj = columns_of(data.x(), model.columns);
  const Vector local = solve_ridge(xj, data.y(), lambda, "ridge_fit");
  FitResult fit;
  fit.coefficients = scatter(local, model.columns, data.p());
  fit.model_id = model.id;
  fit.lambda = lambda;
  fit.residual_ss = (data.y() - xj * local).squaredNorm();
  return fit;
}

double gcv_score(const Dataset& data, const CandidateModel& model, double lambda) {
  validate_candidate(model, data.p());
  if (!std::isfinite(lambda) || lambda < 0.0)
    fail(ErrorCode::InvalidArgument, "lambda must be finite and >= 0");
  const Matrix xj = columns_of(data.x(), model.columns);
  Matrix gram = xj.transpose() * xj;
  const Matrix raw_gram = gram;
  gram.diagonal().array() += lambda;
  const ScaledCholesky llt(gram);
  const double n = static_cast<double>(data.n());
  if (llt.singular(lambda)) {
    // A saturated or rank-deficient unpenalised fit leaves no residual
    // degrees of freedom to score.
    fail(ErrorCode::Degenerate, "gcv_score: singular system, trace of I - H is zero or undefined");
  }
  const double trace_h = llt.solve_matrix(raw_gram).trace();
  const double denom = n - trace_h;
  if (!(denom > 1e-10 * n))
    fail(ErrorCode::Degenerate, "gcv_score: tr(I - H) = 0, saturated fit");
  const Vector beta = llt.solve(xj.transpose() * data.y());
  const double rss = (data.y() - xj * beta).squaredNorm();
  return n * rss / (denom * denom);
}

double kfold_score(const Dataset& data, const CandidateModel& model, double lambda, int folds) {
  validate_candidate(model, data.p());
  const int k = std::min<Index>(folds, data.n());
  if (k < 2) fail(ErrorCode::InvalidArgument, "k-fold score needs at least 2 folds");
  const Matrix xj = columns_of(data.x(), model.columns);
  double total = 0.0;
  for (const auto& block : contiguous_folds(data.n(), k)) {
    std::vector<Index> train;
    train.reserve(static_cast<std::size_t>(data.n()));
    for (Index i = 0, b = 0; i < data.n(); ++i) {
      if (b < static_cast<Index>(block.size()) && block[static_cast<std::size_t>(b)] == i) {
        ++b;
        continue;
      }
      train.push_back(i);
    }
    Matrix xt(static_cast<Index>(train.size()), xj.cols());
    Vector yt(static_cast<Index>(train.size()));
    for (std::size_t r = 0; r < train.size(); ++r) {
      xt.row(static_cast<Index>(r)) = xj.row(train[r]);
      yt(static_cast<Index>(r)) = data.y()(train[r]);
    }
    const Vector beta = solve_ridge(xt, yt, lambda, "kfold_score");
    for (Index i : block) {
      const double e = data.y()(i) - xj.row(i).dot(beta);
      total += e * e;
    }
  }
  return total / static_cast<double>(data.n());
}

std::optional<std::pair<std::size_t, std::size_t>> pick_best(
    const SelectorConfig& config, const std::vector<std::vector<std::optional<double>>>& scores,
    double response_mean_square) {
  std::optional<double> best;
  for (const auto& row : scores)
    for (const auto& s : row)
      if (s && (!best || *s < *best)) best = *s;
  if (!best) return std::nullopt;

  const double cutoff = *best + kSelectionTieTolerance * (*best + response_mean_square);
  std::optional<std::pair<std::size_t, std::size_t>> pick;
  auto better = [&](std::size_t c, std::size_t l) {
    if (!pick) return true;
    const auto& a = config.candidates[c];
    const auto& b = config.candidates[pick->first];
    if (a.columns.size() != b.columns.size()) return a.columns.size() < b.columns.size();
    if (config.lambda_grid[l] != config.lambda_grid[pick->second])
      return config.lambda_grid[l] < config.lambda_grid[pick->second];
    return a.id < b.id;
  };
  for (std::size_t c = 0; c < scores.size(); ++c)
    for (std::size_t l = 0; l < scores[c].size(); ++l)
      if (scores[c][l] && *scores[c][l] <= cutoff && better(c, l)) pick = {c, l};
  return pick;
}

FitResult select_fit(const Dataset& data, const SelectorConfig& config) {
  return PreparedSelector(data.x(), config).select(data.y());
}

}  // namespace pbs
