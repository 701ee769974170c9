#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "pbs/model_core.hpp"

namespace pbs {

/// Monte Carlo study on y = 1 + X beta_j + eps, X ~ U(-5, 5)^{n x 20},
/// beta_j = (1_{5j}, 0_{20-5j}), eps ~ N(0, noise_sd^2 I).
struct StudyConfig {
  Index n = 30;
  int true_model = 2;
  double noise_sd = 5.0;
  int reps = 100;
  Index bootstrap_size = 200;
  std::vector<double> sigma2_sweep;
  std::vector<double> gamma_sweep;
  std::vector<double> lambda_grid;
  Criterion criterion = Criterion::Gcv;
  int cv_folds = 5;
  std::uint64_t master_seed = 1;
};

inline constexpr Index kStudyFeatures = 20;
inline constexpr int kStudyModels = 4;

/// Fills empty sweeps and grid with the defaults and checks every field.
StudyConfig normalized(StudyConfig config);
void validate_study(const StudyConfig& config);

/// 1.0^2, 1.2^2, ..., 10^2.
std::vector<double> default_sigma2_sweep();
std::vector<double> default_gamma_sweep();

struct StudyCell {
  double sigma2 = 0.0;
  double gamma = 0.0;
  double mse = 0.0;
  std::array<double, kStudyModels> selection_freq{};
};

struct StudyResult {
  /// sigma2-major: cells[i * gamma_count + j].
  std::vector<StudyCell> cells;
  std::size_t gamma_count = 0;
  double ridge_baseline_mse = 0.0;

  const StudyCell& at(std::size_t sigma_index, std::size_t gamma_index) const {
    return cells.at(sigma_index * gamma_count + gamma_index);
  }
};

/// n x p matrix of U(-5, 5) draws.
Matrix generate_design(Index n, Index p, std::uint64_t seed);

/// 1 + X beta_j + noise; X must have 20 columns and j lie in 1..4.
Vector generate_response(const Matrix& x, int true_model, double noise_sd, std::uint64_t seed);

/// (intercept, beta_j), length 21.
Vector true_coefficients(int true_model);

/// The design used by the study: a column of ones followed by X.
Matrix with_intercept(const Matrix& x);

/// Models 1..4: intercept plus the first 5j features.
std::vector<CandidateModel> nested_candidates();

/// Seeds of replication `rep`: design, response and bootstrap streams. The
/// bootstrap seed is shared by every (sigma2, gamma) cell of the replication.
struct RepSeeds {
  std::uint64_t design, response, bootstrap;
};
RepSeeds replication_seeds(std::uint64_t master_seed, int rep) noexcept;

StudyResult run_study(const StudyConfig& config, unsigned threads = 1);

/// Long format `sigma2,gamma,model_id,value`. MSE rows use model_id "pbs"
/// with a final "ridge_gcv" row whose sigma2 and gamma are empty.
void write_study_csvs(const StudyResult& result, const std::filesystem::path& mse_path,
                      const std::filesystem::path& freq_path);
StudyResult read_study_csvs(const std::filesystem::path& mse_path,
                            const std::filesystem::path& freq_path);

/// MSE against sigma2, one polyline per gamma.
std::string study_mse_svg(const StudyResult& result);

}  // namespace pbs
