#include "pbs/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "pbs/error.hpp"
#include "pbs/parallel.hpp"
#include "pbs/rng.hpp"

namespace pbs {

namespace {

constexpr Index kBlockSize = 64;
constexpr double kNegativeVarianceSlack = 1e-12;

void check_dimension(const Vector& x_new, Index p) {
  if (x_new.size() != p) {
    std::ostringstream msg;
    msg << "x_new has " << x_new.size() << " entries, model has p=" << p;
    fail(ErrorCode::InvalidArgument, msg.str());
  }
}

ScaledCholesky gram_factor(const Dataset& data) {
  ScaledCholesky llt(data.full_x().transpose() * data.full_x());
  if (llt.singular(0.0)) {
    std::ostringstream msg;
    msg << "X'X of the " << data.n() << "x" << data.full_p() << " design is singular";
    fail(ErrorCode::Singular, msg.str());
  }
  return llt;
}

double clamp_variance(double value) {
  if (value >= 0.0) return value;
  if (value > -kNegativeVarianceSlack) return 0.0;
  std::ostringstream msg;
  msg << "quadratic-form variance evaluated to " << value;
  fail(ErrorCode::Internal, msg.str());
}

void require_delta_method(const PbsFit& fit) {
  if (fit.distribution.sigma2 == 0.0)
    fail(ErrorCode::Degenerate,
         "resampling variance is 0: the degenerate point-mass mode has no delta-method variance");
}

FitResult select_replicate(const PreparedSelector& selector, const Vector& y_star, Index b) {
  try {
    return selector.select(y_star);
  } catch (const Error& e) {
    fail(e.code(), "replicate " + std::to_string(b) + ": " + e.what());
  }
}

}  // namespace

void validate_distribution(const ResamplingDistribution& dist) {
  if (!(dist.gamma >= 0.0 && dist.gamma <= 1.0))
    fail(ErrorCode::InvalidArgument, "gamma must lie in [0, 1]");
  if (!(dist.sigma2 >= 0.0) || !std::isfinite(dist.sigma2))
    fail(ErrorCode::InvalidArgument, "sigma2 must be finite and >= 0");
}

Vector resampling_mean(const Dataset& data, const FitResult& ols, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail(ErrorCode::InvalidArgument, "gamma must lie in [0, 1]");
  if (ols.coefficients.size() != data.p())
    fail(ErrorCode::InvalidArgument, "OLS coefficients do not match the design");
  const Vector fitted = data.x() * ols.coefficients;
  if (gamma == 1.0) return fitted;
  if (gamma == 0.0) return data.y();
  return gamma * fitted + (1.0 - gamma) * data.y();
}

Vector draw_replicate(const Vector& mean, double sigma2, std::uint64_t seed, Index b) {
  if (!(sigma2 >= 0.0)) fail(ErrorCode::InvalidArgument, "sigma2 must be >= 0");
  if (sigma2 == 0.0) return mean;
  const double sd = std::sqrt(sigma2);
  CounterStream stream(seed, static_cast<std::uint64_t>(b));
  Vector out(mean.size());
  for (Index i = 0; i < mean.size(); ++i) out(i) = mean(i) + sd * stream.normal();
  return out;
}

std::vector<Vector> draw_replicates(const Vector& mean, double sigma2, Index count,
                                    std::uint64_t seed) {
  if (count < 1) fail(ErrorCode::InvalidArgument, "bootstrap size must be >= 1");
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index b = 0; b < count; ++b) out.push_back(draw_replicate(mean, sigma2, seed, b));
  return out;
}

PbsFit pbs_fit(const Dataset& data, const ResamplingDistribution& dist, Index bootstrap_size,
               const SelectorConfig& selector, std::uint64_t seed, const PbsOptions& options) {
  validate_distribution(dist);
  const FitResult ols = ols_fit(data);
  const PreparedSelector prepared(data.x(), selector);
  return pbs_fit(data, prepared, resampling_mean(data, ols, dist.gamma), dist, bootstrap_size,
                 seed, options);
}

PbsFit pbs_fit(const Dataset& data, const PreparedSelector& selector, const Vector& mean,
               const ResamplingDistribution& dist, Index bootstrap_size, std::uint64_t seed,
               const PbsOptions& options) {
  validate_distribution(dist);
  if (bootstrap_size < 1) fail(ErrorCode::InvalidArgument, "bootstrap size must be >= 1");
  if (selector.n() != data.n() || selector.p() != data.p() || mean.size() != data.n())
    fail(ErrorCode::InvalidArgument, "selector, mean and dataset dimensions disagree");

  const Index n = data.n(), p = data.p();
  PbsFit fit;
  fit.distribution = dist;
  fit.seed = seed;
  fit.replicates.reserve(static_cast<std::size_t>(bootstrap_size));
  if (options.store_responses) fit.responses.resize(n, bootstrap_size);

  Vector beta_sum = Vector::Zero(p), y_sum = Vector::Zero(n);
  Vector mean_y = Vector::Zero(n), mean_beta = Vector::Zero(p);
  Matrix comoment_sum = Matrix::Zero(n, p);

  std::vector<Vector> block_y(static_cast<std::size_t>(kBlockSize));
  std::vector<FitResult> block_fit(static_cast<std::size_t>(kBlockSize));
  for (Index start = 0; start < bootstrap_size; start += kBlockSize) {
    const Index count = std::min(kBlockSize, bootstrap_size - start);
    parallel_for(static_cast<std::size_t>(count), options.threads, [&](std::size_t k) {
      const Index b = start + static_cast<Index>(k);
      block_y[k] = draw_replicate(mean, dist.sigma2, seed, b);
      block_fit[k] = select_replicate(selector, block_y[k], b);
    });

    // Fixed-order reduction.
    for (Index k = 0; k < count; ++k) {
      const Index b = start + k;
      const Vector& y_star = block_y[static_cast<std::size_t>(k)];
      FitResult& f = block_fit[static_cast<std::size_t>(k)];
      beta_sum += f.coefficients;
      y_sum += y_star;
      const double count_so_far = static_cast<double>(b + 1);
      const Vector dy = y_star - mean_y;
      mean_y += dy / count_so_far;
      mean_beta += (f.coefficients - mean_beta) / count_so_far;
      comoment_sum.noalias() += dy * (f.coefficients - mean_beta).transpose();
      if (options.store_responses) fit.responses.col(b) = y_star;
      fit.replicates.push_back({f.model_id, f.lambda, std::move(f.coefficients)});
    }
  }

  const double count = static_cast<double>(bootstrap_size);
  fit.beta_pbs = beta_sum / count;
  fit.ybar_star = y_sum / count;
  fit.comoment = comoment_sum / count;
  return fit;
}

Vector smoothed_coefficients(const PreparedSelector& selector, const Vector& mean, double sigma2,
                             Index bootstrap_size, std::uint64_t seed, unsigned threads) {
  if (bootstrap_size < 1) fail(ErrorCode::InvalidArgument, "bootstrap size must be >= 1");
  std::vector<Vector> coefs(static_cast<std::size_t>(bootstrap_size));
  parallel_for(coefs.size(), threads, [&](std::size_t k) {
    const Index b = static_cast<Index>(k);
    coefs[k] = select_replicate(selector, draw_replicate(mean, sigma2, seed, b), b).coefficients;
  });
  Vector sum = Vector::Zero(selector.p());
  for (const auto& c : coefs) sum += c;
  return sum / static_cast<double>(bootstrap_size);
}

double pbs_predict(const PbsFit& fit, const Vector& x_new) {
  check_dimension(x_new, fit.beta_pbs.size());
  return x_new.dot(fit.beta_pbs);
}

Vector prediction_covariance(const PbsFit& fit, const Vector& x_new) {
  if (!fit.has_responses())
    fail(ErrorCode::InvalidArgument, "fit was built without stored responses");
  const double mu_pbs = pbs_predict(fit, x_new);
  Vector cov = Vector::Zero(fit.responses.rows());
  for (Index b = 0; b < fit.bootstrap_size(); ++b) {
    const double mu_b = x_new.dot(fit.replicates[static_cast<std::size_t>(b)].coefficients);
    cov += (mu_b - mu_pbs) * (fit.responses.col(b) - fit.ybar_star);
  }
  return cov / static_cast<double>(fit.bootstrap_size());
}

Vector prediction_covariance_from_moments(const PbsFit& fit, const Vector& x_new) {
  check_dimension(x_new, fit.beta_pbs.size());
  return fit.comoment * x_new;
}

double smoothed_variance(const PbsFit& fit, const Dataset& data, const Vector& x_new) {
  require_delta_method(fit);
  check_dimension(x_new, data.p());
  const Vector cov = prediction_covariance_from_moments(fit, x_new);
  if (cov.size() != data.n()) fail(ErrorCode::InvalidArgument, "fit was built on another dataset");
  const double gamma = fit.distribution.gamma;
  Vector mixed = (1.0 - gamma) * cov;
  if (gamma != 0.0) {
    const auto llt = gram_factor(data);
    mixed += gamma * (data.full_x() * llt.solve(data.full_x().transpose() * cov));
  }
  return clamp_variance(mixed.squaredNorm() / fit.distribution.sigma2);
}

double smoothed_variance_gram(const PbsFit& fit, const Dataset& data, const Vector& x_new) {
  require_delta_method(fit);
  check_dimension(x_new, data.p());
  const Vector cov = prediction_covariance_from_moments(fit, x_new);
  if (cov.size() != data.n()) fail(ErrorCode::InvalidArgument, "fit was built on another dataset");
  const Vector projected = data.full_x().transpose() * cov;
  const auto llt = gram_factor(data);
  return clamp_variance(projected.dot(llt.solve(projected)) / fit.distribution.sigma2);
}

double residual_variance_pbs(const PbsFit& fit, const Dataset& data) {
  if (data.n() <= data.full_p()) {
    std::ostringstream msg;
    msg << "residual variance needs n > p (n=" << data.n() << ", p=" << data.full_p() << ")";
    fail(ErrorCode::DegreesOfFreedom, msg.str());
  }
  check_dimension(fit.beta_pbs, data.p());
  return (data.y() - data.x() * fit.beta_pbs).squaredNorm() /
         static_cast<double>(data.n() - data.full_p());
}

std::vector<double> selection_frequencies(const PbsFit& fit, std::span<const int> model_ids) {
  std::vector<double> freq(model_ids.size(), 0.0);
  if (fit.replicates.empty()) return freq;
  for (const auto& r : fit.replicates)
    for (std::size_t k = 0; k < model_ids.size(); ++k)
      if (r.model_id == model_ids[k]) freq[k] += 1.0;
  for (auto& f : freq) f /= static_cast<double>(fit.replicates.size());
  return freq;
}

double normal_critical_value(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - alpha / 2.0);
}

PredictionInterval make_interval(double center, double smoothing_variance,
                                 double residual_variance, double alpha) {
  if (!(smoothing_variance >= 0.0) || !(residual_variance >= 0.0))
    fail(ErrorCode::InvalidArgument, "variance components must be >= 0");
  PredictionInterval pi;
  pi.center = center;
  pi.level = 1.0 - alpha;
  pi.smoothing_variance = smoothing_variance;
  pi.residual_variance = residual_variance;
  pi.half_width = normal_critical_value(alpha) * std::sqrt(smoothing_variance + residual_variance);
  return pi;
}

PredictionInterval prediction_interval(const PbsFit& fit, const Dataset& data,
                                       const Vector& x_new, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
  return make_interval(pbs_predict(fit, x_new), smoothed_variance(fit, data, x_new),
                       residual_variance_pbs(fit, data), alpha);
}

PredictionInterval ridge_prediction_interval(const Dataset& data, const CandidateModel& model,
                                             const FitResult& fit, const Vector& x_new,
                                             double alpha, double sigma2) {
  validate_candidate(model, data.p());
  check_dimension(x_new, data.p());
  if (!(sigma2 >= 0.0)) fail(ErrorCode::InvalidArgument, "sigma2 must be >= 0");
  const Index k = static_cast<Index>(model.columns.size());
  Matrix xj(data.n(), k);
  Vector xn(k);
  for (Index c = 0; c < k; ++c) {
    xj.col(c) = data.x().col(model.columns[static_cast<std::size_t>(c)]);
    xn(c) = x_new(model.columns[static_cast<std::size_t>(c)]);
  }
  const Matrix gram = xj.transpose() * xj;
  Matrix a = gram;
  a.diagonal().array() += fit.lambda;
  const ScaledCholesky llt(a);
  if (llt.singular(fit.lambda))
    fail(ErrorCode::Singular, "ridge interval: penalised Gram matrix is singular");
  const Vector w = llt.solve(xn);
  const double estimator_variance = clamp_variance(sigma2 * w.dot(gram * w));
  return make_interval(x_new.dot(fit.coefficients), estimator_variance, sigma2, alpha);
}

}  // namespace pbs
