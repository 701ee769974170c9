#pragma once

#include <optional>
#include <vector>

#include "pbs/model_core.hpp"

namespace pbs {

/// Selector with the response-independent work done once.
///
/// Every candidate design (and, for K-fold scoring, every training block of
/// it) is reduced to a thin SVD X_j = U diag(d) V'. Scoring a new response
/// then costs one projection U'y per candidate plus O(rank) per lambda, which
/// is what makes thousands of bootstrap replicates affordable.
class PreparedSelector {
 public:
  PreparedSelector(const Matrix& x, SelectorConfig config);

  const SelectorConfig& config() const noexcept { return config_; }
  Index n() const noexcept { return n_; }
  Index p() const noexcept { return p_; }

  /// scores()[c][l]: criterion value of candidate c at lambda_grid[l], nullopt
  /// when the pair is singular or saturated.
  std::vector<std::vector<std::optional<double>>> scores(const Vector& y) const;

  /// Argmin fit for response y; throws SelectionFailure when no pair scores.
  FitResult select(const Vector& y) const;

  /// Coefficients of one pair, scattered into the full column space.
  Vector coefficients(std::size_t candidate, double lambda, const Vector& y) const;

 private:
  struct Decomposition {
    std::vector<Index> rows;  // empty: all rows
    Matrix u;
    Vector d;
    Matrix v;
    double rcond0 = 0.0;      // scaled Gram rcond at lambda = 0
    Matrix held_basis;        // K-fold: held-out rows times v
  };

  struct PreparedCandidate {
    Decomposition full;
    std::vector<Decomposition> training;  // K-fold only
    std::vector<std::vector<Index>> held_out;
  };

  static Decomposition decompose(const Matrix& xj, std::vector<Index> rows);
  static bool pair_singular(const Decomposition& dec, double lambda);

  std::optional<double> gcv(const Decomposition& dec, const Vector& proj, double residual_perp,
                            double lambda) const;

  SelectorConfig config_;
  Index n_ = 0;
  Index p_ = 0;
  Matrix x_;
  std::vector<PreparedCandidate> prepared_;
};

}  // namespace pbs
