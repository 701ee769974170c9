#include "pbs/selector.hpp"

#include <algorithm>
#include <cmath>

#include "pbs/error.hpp"

namespace pbs {

namespace {

Matrix gather(const Matrix& x, const std::vector<Index>& rows, const std::vector<Index>& cols) {
  const bool all_rows = rows.empty();
  const Index nr = all_rows ? x.rows() : static_cast<Index>(rows.size());
  Matrix out(nr, static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (Index r = 0; r < nr; ++r)
      out(r, static_cast<Index>(c)) = x(all_rows ? r : rows[static_cast<std::size_t>(r)], cols[c]);
  return out;
}

// Shrinkage factors d / (d^2 + lambda); zero singular values contribute
// nothing at any lambda.
Vector ridge_filter(const Vector& d, double lambda) {
  Vector f(d.size());
  for (Index k = 0; k < d.size(); ++k) {
    const double dk = d(k);
    f(k) = dk > 0.0 ? dk / (dk * dk + lambda) : 0.0;
  }
  return f;
}

}  // namespace

PreparedSelector::Decomposition PreparedSelector::decompose(const Matrix& xj,
                                                            std::vector<Index> rows) {
  Decomposition dec;
  dec.rows = std::move(rows);
  Eigen::BDCSVD<Matrix> svd(xj, Eigen::ComputeThinU | Eigen::ComputeThinV);
  dec.u = svd.matrixU();
  dec.d = svd.singularValues();
  dec.v = svd.matrixV();
  if (xj.rows() >= xj.cols()) dec.rcond0 = ScaledCholesky(xj.transpose() * xj).rcond();
  return dec;
}

bool PreparedSelector::pair_singular(const Decomposition& dec, double lambda) {
  if (dec.d.size() == 0) return true;
  return lambda == 0.0 && !(dec.rcond0 >= kSingularRcond);
}

PreparedSelector::PreparedSelector(const Matrix& x, SelectorConfig config)
    : config_(std::move(config)), n_(x.rows()), p_(x.cols()), x_(x) {
  validate_selector(config_, p_);
  prepared_.reserve(config_.candidates.size());

  std::vector<std::vector<Index>> folds;
  if (config_.criterion == Criterion::KFold) {
    const int k = static_cast<int>(std::min<Index>(config_.cv_folds, n_));
    if (k < 2) fail(ErrorCode::InvalidArgument, "k-fold criterion needs n >= 2");
    folds = contiguous_folds(n_, k);
  }

  for (const auto& model : config_.candidates) {
    PreparedCandidate pc;
    pc.full = decompose(gather(x_, {}, model.columns), {});
    for (const auto& block : folds) {
      std::vector<Index> train;
      std::size_t b = 0;
      for (Index i = 0; i < n_; ++i) {
        if (b < block.size() && block[b] == i) {
          ++b;
          continue;
        }
        train.push_back(i);
      }
      Decomposition dec = decompose(gather(x_, train, model.columns), train);
      // Held-out rows mapped into the training right-singular basis.
      dec.held_basis = gather(x_, block, model.columns) * dec.v;
      pc.training.push_back(std::move(dec));
      pc.held_out.push_back(block);
    }
    prepared_.push_back(std::move(pc));
  }
}

std::optional<double> PreparedSelector::gcv(const Decomposition& dec, const Vector& proj,
                                            double residual_perp, double lambda) const {
  if (pair_singular(dec, lambda)) return std::nullopt;
  double rss = residual_perp;
  double trace = 0.0;
  for (Index k = 0; k < dec.d.size(); ++k) {
    const double d2 = dec.d(k) * dec.d(k);
    if (d2 == 0.0) {
      rss += proj(k) * proj(k);
      continue;
    }
    const double shrink = lambda / (d2 + lambda);
    rss += shrink * shrink * proj(k) * proj(k);
    trace += d2 / (d2 + lambda);
  }
  const double n = static_cast<double>(n_);
  const double denom = n - trace;
  if (!(denom > 1e-10 * n)) return std::nullopt;
  return n * rss / (denom * denom);
}

std::vector<std::vector<std::optional<double>>> PreparedSelector::scores(const Vector& y) const {
  if (y.size() != n_) fail(ErrorCode::InvalidArgument, "response length does not match design");
  const auto& grid = config_.lambda_grid;
  std::vector<std::vector<std::optional<double>>> out(prepared_.size());

  for (std::size_t c = 0; c < prepared_.size(); ++c) {
    const auto& pc = prepared_[c];
    auto& row = out[c];
    row.assign(grid.size(), std::nullopt);

    if (config_.criterion == Criterion::Gcv) {
      const Vector proj = pc.full.u.transpose() * y;
      const double residual_perp = (y - pc.full.u * proj).squaredNorm();
      for (std::size_t l = 0; l < grid.size(); ++l)
        row[l] = gcv(pc.full, proj, residual_perp, grid[l]);
      continue;
    }

    std::vector<double> totals(grid.size(), 0.0);
    std::vector<bool> ok(grid.size(), true);
    for (std::size_t f = 0; f < pc.training.size(); ++f) {
      const auto& dec = pc.training[f];
      Vector yt(static_cast<Index>(dec.rows.size()));
      for (std::size_t r = 0; r < dec.rows.size(); ++r) yt(static_cast<Index>(r)) = y(dec.rows[r]);
      const Vector proj = dec.u.transpose() * yt;
      const auto& held = pc.held_out[f];
      const Matrix& xh = dec.held_basis;
      for (std::size_t l = 0; l < grid.size(); ++l) {
        if (!ok[l]) continue;
        if (pair_singular(dec, grid[l])) {
          ok[l] = false;
          continue;
        }
        const Vector pred = xh * ridge_filter(dec.d, grid[l]).cwiseProduct(proj);
        for (std::size_t r = 0; r < held.size(); ++r) {
          const double e = y(held[r]) - pred(static_cast<Index>(r));
          totals[l] += e * e;
        }
      }
    }
    for (std::size_t l = 0; l < grid.size(); ++l)
      if (ok[l]) row[l] = totals[l] / static_cast<double>(n_);
  }
  return out;
}

Vector PreparedSelector::coefficients(std::size_t candidate, double lambda, const Vector& y) const {
  const auto& dec = prepared_.at(candidate).full;
  const Vector local = dec.v * ridge_filter(dec.d, lambda).cwiseProduct(dec.u.transpose() * y);
  const auto& cols = config_.candidates[candidate].columns;
  Vector out = Vector::Zero(p_);
  for (std::size_t k = 0; k < cols.size(); ++k) out(cols[k]) = local(static_cast<Index>(k));
  return out;
}

FitResult PreparedSelector::select(const Vector& y) const {
  const auto table = scores(y);
  const auto pick = pick_best(config_, table, y.squaredNorm() / static_cast<double>(n_));
  if (!pick)
    fail(ErrorCode::SelectionFailure,
         "no (model, lambda) pair could be scored: every pair is singular or saturated");
  FitResult fit;
  fit.model_id = config_.candidates[pick->first].id;
  fit.lambda = config_.lambda_grid[pick->second];
  fit.coefficients = coefficients(pick->first, fit.lambda, y);
  fit.residual_ss = (y - x_ * fit.coefficients).squaredNorm();
  return fit;
}

}  // namespace pbs
