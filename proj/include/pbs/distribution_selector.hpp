#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "pbs/bootstrap.hpp"
#include "pbs/model_core.hpp"

namespace pbs {

enum class FoldMode {
  Random,      // seeded permutation, then contiguous blocks of it
  Contiguous,  // blocks in row order, for time-ordered data
};

/// Where the OLS fit inside the resampling mean comes from on each training
/// block.
enum class OlsSource {
  PerFold,  // refit on the training rows
  Global,   // full-data fit restricted to the training rows
};

struct CvGrid {
  std::vector<double> sigma2_candidates;
  std::vector<double> gamma_candidates;
  int folds = 5;
  Index bootstrap_size = 500;
  std::uint64_t seed = 0;
  FoldMode fold_mode = FoldMode::Random;
  OlsSource ols_source = OlsSource::PerFold;
};

void validate_grid(const CvGrid& grid, Index n);

using Partition = std::vector<std::vector<Index>>;

/// K disjoint sorted blocks covering [0, n) with sizes differing by at most 1.
Partition kfold_split(Index n, int folds, std::uint64_t seed, FoldMode mode = FoldMode::Random);

struct CvSurface {
  /// errors(i, j): summed held-out squared error at (sigma2_i, gamma_j).
  Matrix errors;
  std::vector<double> sigma2_candidates;
  std::vector<double> gamma_candidates;
  Partition folds;
  ResamplingDistribution selected;
};

/// Seed of the inner bootstrap for fold k and grid cell (i, j).
std::uint64_t cell_seed(std::uint64_t seed, Index fold, Index sigma_index, Index gamma_index) noexcept;

CvSurface cv_error_surface(const Dataset& data, const CvGrid& grid, const SelectorConfig& selector,
                           unsigned threads = 1);

/// One surface cell computed on its own; reproduces cv_error_surface's entry
/// bit for bit.
double cv_cell_error(const Dataset& data, const CvGrid& grid, const SelectorConfig& selector,
                     Index sigma_index, Index gamma_index);

/// Argmin over the surface; ties go to the smaller sigma2, then smaller gamma.
ResamplingDistribution select_distribution(const CvSurface& surface);

/// Cross-validates sigma2 alone with the classic X beta_ols resampling mean
/// (gamma fixed at 1). Returns a T x 1 surface.
CvSurface cv_sigma2_only(const Dataset& data, std::span<const double> sigma2_candidates,
                         const CvGrid& settings, const SelectorConfig& selector,
                         unsigned threads = 1);

/// `count` values log-spaced over [sigma2_ub / 100, 100 sigma2_ub].
std::vector<double> default_sigma2_candidates(const Dataset& data, int count = 50);
std::vector<double> default_gamma_candidates();

/// CSV with a header row of gamma values and one row per sigma2 candidate.
void write_surface_csv(const CvSurface& surface, std::ostream& out);
/// Parses write_surface_csv output (errors and candidate values only).
CvSurface read_surface_csv(std::istream& in);

}  // namespace pbs
