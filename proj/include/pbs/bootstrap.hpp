#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pbs/model_core.hpp"
#include "pbs/selector.hpp"

namespace pbs {

/// N(gamma X beta_ols + (1 - gamma) y, sigma2 I). sigma2 = 0 is the
/// degenerate point mass; it is accepted for fitting but has no delta-method
/// variance.
struct ResamplingDistribution {
  double gamma = 1.0;
  double sigma2 = 0.0;
};

void validate_distribution(const ResamplingDistribution& dist);

struct ReplicateRecord {
  int model_id = -1;
  double lambda = 0.0;
  Vector coefficients;
};

struct PbsOptions {
  unsigned threads = 1;
  /// Keep every bootstrap response (n x B). When false only the
  /// response/coefficient co-moment is retained.
  bool store_responses = true;
};

struct PbsFit {
  Vector beta_pbs;
  std::vector<ReplicateRecord> replicates;
  Matrix responses;  // column b is y*_b; 0 x 0 when not stored
  Vector ybar_star;
  /// (1/B) sum_b (y*_b - ybar*)(beta_b - beta_pbs)', n x p. For any x_new the
  /// bootstrap covariance between predictions and responses is comoment * x_new.
  Matrix comoment;
  ResamplingDistribution distribution;
  std::uint64_t seed = 0;

  Index bootstrap_size() const noexcept { return static_cast<Index>(replicates.size()); }
  bool has_responses() const noexcept { return responses.cols() > 0; }
};

/// gamma X beta_ols + (1 - gamma) y.
Vector resampling_mean(const Dataset& data, const FitResult& ols, double gamma);

/// Replicate b of N(mean, sigma2 I). Replicate b always uses Philox stream
/// (seed, b), so the draw does not depend on which thread makes it.
Vector draw_replicate(const Vector& mean, double sigma2, std::uint64_t seed, Index b);
std::vector<Vector> draw_replicates(const Vector& mean, double sigma2, Index count,
                                    std::uint64_t seed);

PbsFit pbs_fit(const Dataset& data, const ResamplingDistribution& dist, Index bootstrap_size,
               const SelectorConfig& selector, std::uint64_t seed, const PbsOptions& options = {});

/// Same as above with the selector already prepared on data.x() and the
/// resampling mean supplied by the caller.
PbsFit pbs_fit(const Dataset& data, const PreparedSelector& selector, const Vector& mean,
               const ResamplingDistribution& dist, Index bootstrap_size, std::uint64_t seed,
               const PbsOptions& options = {});

/// Only the averaged coefficients; no per-replicate state is kept.
Vector smoothed_coefficients(const PreparedSelector& selector, const Vector& mean, double sigma2,
                             Index bootstrap_size, std::uint64_t seed, unsigned threads = 1);

double pbs_predict(const PbsFit& fit, const Vector& x_new);

/// Cov-hat = (1/B) sum_b (mu_b - mu_pbs)(y*_b - ybar*) from the stored
/// responses. Requires store_responses.
Vector prediction_covariance(const PbsFit& fit, const Vector& x_new);
/// The same quantity from the co-moment sufficient statistic.
Vector prediction_covariance_from_moments(const PbsFit& fit, const Vector& x_new);

/// (1/sigma2) Cov' {gamma H + (1 - gamma) I}^2 Cov with H the hat matrix of
/// the full design.
double smoothed_variance(const PbsFit& fit, const Dataset& data, const Vector& x_new);

/// (1/sigma2) (X'Cov)' (X'X)^-1 (X'Cov): the Gram-space form that applies when
/// the resampling mean is X beta_ols. Equal to smoothed_variance at gamma = 1.
double smoothed_variance_gram(const PbsFit& fit, const Dataset& data, const Vector& x_new);

/// ||y - X beta_pbs||^2 / (n - p), p the full column count.
double residual_variance_pbs(const PbsFit& fit, const Dataset& data);

/// Fraction of replicates that selected each listed model id.
std::vector<double> selection_frequencies(const PbsFit& fit, std::span<const int> model_ids);

struct PredictionInterval {
  double center = 0.0;
  double half_width = 0.0;
  double level = 0.95;
  double smoothing_variance = 0.0;
  double residual_variance = 0.0;

  double lower() const noexcept { return center - half_width; }
  double upper() const noexcept { return center + half_width; }
};

/// z_{alpha/2}: the 100(1 - alpha/2) percentile of N(0, 1).
double normal_critical_value(double alpha);

/// mu_pbs +- z_{alpha/2} sqrt(smoothing + residual).
PredictionInterval prediction_interval(const PbsFit& fit, const Dataset& data,
                                       const Vector& x_new, double alpha);

/// Interval from the components directly.
PredictionInterval make_interval(double center, double smoothing_variance,
                                 double residual_variance, double alpha);

/// Plain ridge interval that ignores selection randomness: the estimator
/// variance is sigma2 A^-1 X_j'X_j A^-1 with A = X_j'X_j + lambda I, plus
/// sigma2 for the new observation.
PredictionInterval ridge_prediction_interval(const Dataset& data, const CandidateModel& model,
                                             const FitResult& fit, const Vector& x_new,
                                             double alpha, double sigma2);

}  // namespace pbs
