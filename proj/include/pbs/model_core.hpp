#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pbs/types.hpp"

namespace pbs {

/// Response vector and design matrix of a linear model y = X beta + eps.
/// Construction validates shape and finiteness.
class Dataset {
 public:
  Dataset(Matrix x, Vector y, std::vector<std::string> column_names = {});

  const Matrix& x() const noexcept { return x_; }
  const Vector& y() const noexcept { return y_; }
  Index n() const noexcept { return x_.rows(); }
  Index p() const noexcept { return x_.cols(); }
  const std::vector<std::string>& column_names() const noexcept { return names_; }

  /// Same design, different response.
  Dataset with_response(Vector y) const;
  /// Row subset in the given order.
  Dataset rows(std::span<const Index> indices) const;

  /// Columns forming the full model used for OLS, the hat matrix and residual
  /// degrees of freedom. Defaults to every column.
  Dataset with_full_model(std::vector<Index> columns) const;
  const std::vector<Index>& full_columns() const noexcept { return full_; }
  const Matrix& full_x() const noexcept { return full_.empty() ? x_ : xf_; }
  Index full_p() const noexcept { return full_x().cols(); }

 private:
  Matrix x_;
  Vector y_;
  std::vector<std::string> names_;
  std::vector<Index> full_;
  Matrix xf_;
};

/// A column subset X_j of the full design. Columns are 0-based.
struct CandidateModel {
  int id = 0;
  std::vector<Index> columns;
};

void validate_candidate(const CandidateModel& model, Index p);
CandidateModel full_model(Index p, int id = 0);

enum class Criterion { Gcv, KFold };

struct SelectorConfig {
  std::vector<CandidateModel> candidates;
  std::vector<double> lambda_grid;
  Criterion criterion = Criterion::Gcv;
  /// Fold count for Criterion::KFold (contiguous folds, clamped to n).
  int cv_folds = 5;
};

void validate_selector(const SelectorConfig& config, Index p);

/// {0} followed by `count` log-spaced values in [lo, hi].
std::vector<double> default_lambda_grid(int count = 50, double lo = 1e-4, double hi = 1e4);

/// Estimated coefficients over the full column space (zeros outside the
/// selected columns) together with the chosen model and penalty.
struct FitResult {
  Vector coefficients;
  int model_id = -1;  // -1: the full design (ordinary least squares)
  double lambda = 0.0;
  double residual_ss = 0.0;
};

/// Reciprocal condition estimate, taken after scaling the Gram matrix to unit
/// diagonal, below which an unpenalised system counts as singular. Penalised
/// systems (lambda > 0) are positive definite and only fail when the
/// factorisation itself breaks down.
inline constexpr double kSingularRcond = 1e-12;

/// Cholesky factor of a symmetric matrix a = S b S with S = diag(a)^(1/2),
/// so b has unit diagonal. rcond() is the estimate for b, which does not
/// depend on the units of the design columns.
class ScaledCholesky {
 public:
  explicit ScaledCholesky(const Matrix& a);

  bool factored() const noexcept { return factored_; }
  double rcond() const noexcept { return rcond_; }
  bool singular(double lambda) const noexcept {
    return !factored_ || (lambda == 0.0 && !(rcond_ >= kSingularRcond));
  }
  /// a^-1 rhs.
  Vector solve(const Vector& rhs) const;
  Matrix solve_matrix(const Matrix& rhs) const;

 private:
  Vector inv_scale_;
  Eigen::LLT<Matrix> llt_;
  bool factored_ = false;
  double rcond_ = 0.0;
};

/// Least squares on the full-model columns, scattered over all p columns.
FitResult ols_fit(const Dataset& data);

/// ||y - X beta_ols||^2 / (n - p), p the full-model column count.
double unbiased_variance(const Dataset& data, const FitResult& ols);

FitResult ridge_fit(const Dataset& data, const CandidateModel& model, double lambda);

/// n ||(I - H) y||^2 / tr(I - H)^2 with H = X_j (X_j'X_j + lambda I)^-1 X_j'.
double gcv_score(const Dataset& data, const CandidateModel& model, double lambda);

/// K contiguous blocks covering [0, n), sizes differing by at most one.
std::vector<std::vector<Index>> contiguous_folds(Index n, int folds);

/// Contiguous K-fold cross-validated mean squared error of one (model, lambda)
/// pair, K clamped to n.
double kfold_score(const Dataset& data, const CandidateModel& model, double lambda, int folds);

/// Joint argmin over candidates x lambda_grid. Scores within
/// kSelectionTieTolerance * (best + mean(y^2)) of the best are ties, resolved
/// by fewer columns, then smaller lambda, then lower model id.
FitResult select_fit(const Dataset& data, const SelectorConfig& config);

inline constexpr double kSelectionTieTolerance = 1e-12;

/// Resolves ties among scored pairs. `scores[c][l]` is the score of
/// candidate c at lambda_grid[l], or nullopt when the pair is degenerate.
/// Returns (candidate index, lambda index) or nullopt when nothing scored.
std::optional<std::pair<std::size_t, std::size_t>> pick_best(
    const SelectorConfig& config, const std::vector<std::vector<std::optional<double>>>& scores,
    double response_mean_square);

}  // namespace pbs
