#include "pbs/distribution_selector.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "pbs/csv.hpp"
#include "pbs/error.hpp"
#include "pbs/parallel.hpp"
#include "pbs/rng.hpp"

namespace pbs {

namespace {

constexpr std::uint64_t kFoldStream = 0xF01D;

struct FoldContext {
  std::unique_ptr<Dataset> train;
  std::unique_ptr<PreparedSelector> selector;
  Vector fitted;  // X^(k) beta_ols
  Matrix held_x;
  Vector held_y;
};

Vector mixed_mean(const FoldContext& ctx, double gamma) {
  if (gamma == 1.0) return ctx.fitted;
  if (gamma == 0.0) return ctx.train->y();
  return gamma * ctx.fitted + (1.0 - gamma) * ctx.train->y();
}

std::vector<FoldContext> prepare_folds(const Dataset& data, const CvGrid& grid,
                                       const SelectorConfig& selector, const Partition& folds,
                                       unsigned threads) {
  Vector global_beta;
  if (grid.ols_source == OlsSource::Global) global_beta = ols_fit(data).coefficients;

  std::vector<FoldContext> contexts(folds.size());
  parallel_for(folds.size(), threads, [&](std::size_t k) {
    const auto& block = folds[k];
    std::vector<Index> train;
    train.reserve(static_cast<std::size_t>(data.n()) - block.size());
    std::size_t b = 0;
    for (Index i = 0; i < data.n(); ++i) {
      if (b < block.size() && block[b] == i) {
        ++b;
        continue;
      }
      train.push_back(i);
    }
    FoldContext& ctx = contexts[k];
    try {
      ctx.train = std::make_unique<Dataset>(data.rows(train));
      const Vector beta = grid.ols_source == OlsSource::Global ? global_beta
                                                                 : ols_fit(*ctx.train).coefficients;
      ctx.fitted = ctx.train->x() * beta;
      ctx.selector = std::make_unique<PreparedSelector>(ctx.train->x(), selector);
    } catch (const Error& e) {
      fail(e.code(), "cross-validation fold " + std::to_string(k) + ": " + e.what());
    }
    const Dataset held = data.rows(block);
    ctx.held_x = held.x();
    ctx.held_y = held.y();
  });
  return contexts;
}

double fold_cell_error(const FoldContext& ctx, const CvGrid& grid, Index k, Index i, Index j,
                       double sigma2, double gamma) {
  try {
    const Vector beta = smoothed_coefficients(*ctx.selector, mixed_mean(ctx, gamma), sigma2,
                                              grid.bootstrap_size, cell_seed(grid.seed, k, i, j));
    return (ctx.held_y - ctx.held_x * beta).squaredNorm();
  } catch (const Error& e) {
    fail(e.code(), "cross-validation fold " + std::to_string(k) + ": " + e.what());
  }
}

CvSurface evaluate(const Dataset& data, const CvGrid& grid, const SelectorConfig& selector,
                   unsigned threads) {
  validate_grid(grid, data.n());
  validate_selector(selector, data.p());
  CvSurface surface;
  surface.sigma2_candidates = grid.sigma2_candidates;
  surface.gamma_candidates = grid.gamma_candidates;
  surface.folds = kfold_split(data.n(), grid.folds, grid.seed, grid.fold_mode);

  const auto contexts = prepare_folds(data, grid, selector, surface.folds, threads);
  const Index nk = static_cast<Index>(contexts.size());
  const Index nt = static_cast<Index>(grid.sigma2_candidates.size());
  const Index ns = static_cast<Index>(grid.gamma_candidates.size());

  std::vector<double> cell(static_cast<std::size_t>(nk * nt * ns));
  parallel_for(cell.size(), threads, [&](std::size_t task) {
    const Index t = static_cast<Index>(task);
    const Index k = t / (nt * ns), i = (t / ns) % nt, j = t % ns;
    cell[task] = fold_cell_error(contexts[static_cast<std::size_t>(k)], grid, k, i, j,
                                 grid.sigma2_candidates[static_cast<std::size_t>(i)],
                                 grid.gamma_candidates[static_cast<std::size_t>(j)]);
  });

  surface.errors = Matrix::Zero(nt, ns);
  for (Index k = 0; k < nk; ++k)
    for (Index i = 0; i < nt; ++i)
      for (Index j = 0; j < ns; ++j)
        surface.errors(i, j) += cell[static_cast<std::size_t>((k * nt + i) * ns + j)];
  surface.selected = select_distribution(surface);
  return surface;
}

}  // namespace

void validate_grid(const CvGrid& grid, Index n) {
  if (grid.sigma2_candidates.empty()) fail(ErrorCode::InvalidArgument, "no sigma2 candidates");
  if (grid.gamma_candidates.empty()) fail(ErrorCode::InvalidArgument, "no gamma candidates");
  for (double s : grid.sigma2_candidates)
    if (!std::isfinite(s) || !(s > 0.0))
      fail(ErrorCode::InvalidArgument, "sigma2 candidates must be finite and > 0");
  for (double g : grid.gamma_candidates)
    if (!(g >= 0.0 && g <= 1.0)) fail(ErrorCode::InvalidArgument, "gamma candidates must lie in [0, 1]");
  if (grid.folds < 2 || grid.folds > n) {
    std::ostringstream msg;
    msg << "fold count K=" << grid.folds << " must satisfy 2 <= K <= n=" << n;
    fail(ErrorCode::InvalidArgument, msg.str());
  }
  if (grid.bootstrap_size < 1) fail(ErrorCode::InvalidArgument, "inner bootstrap size must be >= 1");
}

Partition kfold_split(Index n, int folds, std::uint64_t seed, FoldMode mode) {
  if (folds < 2 || folds > n) {
    std::ostringstream msg;
    msg << "fold count K=" << folds << " must satisfy 2 <= K <= n=" << n;
    fail(ErrorCode::InvalidArgument, msg.str());
  }
  if (mode == FoldMode::Contiguous) return contiguous_folds(n, folds);

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  CounterStream stream(derive_seed(seed, {kFoldStream}));
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[stream.below(i)]);

  Partition out = contiguous_folds(n, folds);
  for (auto& block : out) {
    for (auto& idx : block) idx = order[static_cast<std::size_t>(idx)];
    std::sort(block.begin(), block.end());
  }
  return out;
}

std::uint64_t cell_seed(std::uint64_t seed, Index fold, Index sigma_index, Index gamma_index) noexcept {
  return derive_seed(seed, {static_cast<std::uint64_t>(fold), static_cast<std::uint64_t>(sigma_index),
                            static_cast<std::uint64_t>(gamma_index)});
}

CvSurface cv_error_surface(const Dataset& data, const CvGrid& grid, const SelectorConfig& selector,
                           unsigned threads) {
  return evaluate(data, grid, selector, threads);
}

double cv_cell_error(const Dataset& data, const CvGrid& grid, const SelectorConfig& selector,
                     Index sigma_index, Index gamma_index) {
  validate_grid(grid, data.n());
  validate_selector(selector, data.p());
  if (sigma_index < 0 || sigma_index >= static_cast<Index>(grid.sigma2_candidates.size()) ||
      gamma_index < 0 || gamma_index >= static_cast<Index>(grid.gamma_candidates.size()))
    fail(ErrorCode::InvalidArgument, "cell index out of range");
  const auto folds = kfold_split(data.n(), grid.folds, grid.seed, grid.fold_mode);
  const auto contexts = prepare_folds(data, grid, selector, folds, 1);
  double total = 0.0;
  for (std::size_t k = 0; k < contexts.size(); ++k)
    total += fold_cell_error(contexts[k], grid, static_cast<Index>(k), sigma_index, gamma_index,
                             grid.sigma2_candidates[static_cast<std::size_t>(sigma_index)],
                             grid.gamma_candidates[static_cast<std::size_t>(gamma_index)]);
  return total;
}

ResamplingDistribution select_distribution(const CvSurface& surface) {
  const Index nt = surface.errors.rows(), ns = surface.errors.cols();
  if (nt == 0 || ns == 0) fail(ErrorCode::InvalidArgument, "empty surface");
  Index bi = 0, bj = 0;
  for (Index i = 0; i < nt; ++i) {
    for (Index j = 0; j < ns; ++j) {
      const double e = surface.errors(i, j), best = surface.errors(bi, bj);
      const double s = surface.sigma2_candidates[static_cast<std::size_t>(i)];
      const double g = surface.gamma_candidates[static_cast<std::size_t>(j)];
      const double bs = surface.sigma2_candidates[static_cast<std::size_t>(bi)];
      const double bg = surface.gamma_candidates[static_cast<std::size_t>(bj)];
      if (e < best || (e == best && (s < bs || (s == bs && g < bg)))) {
        bi = i;
        bj = j;
      }
    }
  }
  return {surface.gamma_candidates[static_cast<std::size_t>(bj)],
          surface.sigma2_candidates[static_cast<std::size_t>(bi)]};
}

CvSurface cv_sigma2_only(const Dataset& data, std::span<const double> sigma2_candidates,
                         const CvGrid& settings, const SelectorConfig& selector, unsigned threads) {
  CvGrid grid = settings;
  grid.sigma2_candidates.assign(sigma2_candidates.begin(), sigma2_candidates.end());
  grid.gamma_candidates = {1.0};
  validate_grid(grid, data.n());
  validate_selector(selector, data.p());

  CvSurface surface;
  surface.sigma2_candidates = grid.sigma2_candidates;
  surface.gamma_candidates = grid.gamma_candidates;
  surface.folds = kfold_split(data.n(), grid.folds, grid.seed, grid.fold_mode);
  const auto contexts = prepare_folds(data, grid, selector, surface.folds, threads);

  const Index nk = static_cast<Index>(contexts.size());
  const Index nt = static_cast<Index>(grid.sigma2_candidates.size());
  std::vector<double> cell(static_cast<std::size_t>(nk * nt));
  parallel_for(cell.size(), threads, [&](std::size_t task) {
    const Index k = static_cast<Index>(task) / nt, i = static_cast<Index>(task) % nt;
    const FoldContext& ctx = contexts[static_cast<std::size_t>(k)];
    try {
      // Classic resampling around the OLS fit of the training block.
      const Vector beta = smoothed_coefficients(
          *ctx.selector, ctx.fitted, grid.sigma2_candidates[static_cast<std::size_t>(i)],
          grid.bootstrap_size, cell_seed(grid.seed, k, i, 0));
      cell[task] = (ctx.held_y - ctx.held_x * beta).squaredNorm();
    } catch (const Error& e) {
      fail(e.code(), "cross-validation fold " + std::to_string(k) + ": " + e.what());
    }
  });
  surface.errors = Matrix::Zero(nt, 1);
  for (Index k = 0; k < nk; ++k)
    for (Index i = 0; i < nt; ++i) surface.errors(i, 0) += cell[static_cast<std::size_t>(k * nt + i)];
  surface.selected = select_distribution(surface);
  return surface;
}

std::vector<double> default_sigma2_candidates(const Dataset& data, int count) {
  if (count < 1) fail(ErrorCode::InvalidArgument, "sigma2 candidate count must be >= 1");
  const double ub = unbiased_variance(data, ols_fit(data));
  if (!(ub > 0.0))
    fail(ErrorCode::Degenerate, "unbiased variance is 0; a scale-aware sigma2 grid is undefined");
  if (count == 1) return {ub};
  std::vector<double> out;
  const double lo = std::log10(ub / 100.0), hi = std::log10(ub * 100.0);
  for (int k = 0; k < count; ++k) out.push_back(std::pow(10.0, lo + (hi - lo) * k / (count - 1)));
  return out;
}

std::vector<double> default_gamma_candidates() { return {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}; }

void write_surface_csv(const CvSurface& surface, std::ostream& out) {
  out << "sigma2";
  for (double g : surface.gamma_candidates) out << ',' << format_real(g);
  out << '\n';
  for (std::size_t i = 0; i < surface.sigma2_candidates.size(); ++i) {
    out << format_real(surface.sigma2_candidates[i]);
    for (std::size_t j = 0; j < surface.gamma_candidates.size(); ++j)
      out << ',' << format_real(surface.errors(static_cast<Index>(i), static_cast<Index>(j)));
    out << '\n';
  }
}

CvSurface read_surface_csv(std::istream& in) {
  auto bad = [](std::size_t line, const std::string& what) {
    fail(ErrorCode::Ingestion, "surface csv line " + std::to_string(line) + ": " + what);
  };
  std::string line;
  if (!std::getline(in, line)) bad(1, "missing header");
  auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "sigma2") bad(1, "header must start with 'sigma2'");
  CvSurface surface;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const auto g = parse_real(header[c]);
    if (!g) bad(1, "bad gamma value '" + header[c] + "'");
    surface.gamma_candidates.push_back(*g);
  }
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) bad(line_no, "wrong field count");
    std::vector<double> row;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto v = parse_real(fields[c]);
      if (!v) bad(line_no, "bad number '" + fields[c] + "'");
      row.push_back(*v);
    }
    surface.sigma2_candidates.push_back(row[0]);
    rows.push_back(std::move(row));
  }
  surface.errors.resize(static_cast<Index>(rows.size()), static_cast<Index>(header.size() - 1));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 1; j < rows[i].size(); ++j)
      surface.errors(static_cast<Index>(i), static_cast<Index>(j - 1)) = rows[i][j];
  if (!rows.empty()) surface.selected = select_distribution(surface);
  return surface;
}

}  // namespace pbs
