#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "pbs/pbs.h"

TEST_CASE("c api round trip") {
  std::mt19937_64 rng(3);
  const std::size_t n = 30, p = 3;
  std::vector<double> x(n * p), y(n);
  std::normal_distribution<double> nd;
  for (std::size_t i = 0; i < n; ++i) {
    x[i * p] = 1.0;
    x[i * p + 1] = nd(rng);
    x[i * p + 2] = nd(rng);
    y[i] = 1.0 + 2.0 * x[i * p + 1] + nd(rng);
  }
  pbs_dataset* data = nullptr;
  REQUIRE(pbs_dataset_create(x.data(), y.data(), n, p, &data) == PBS_OK);
  std::size_t rn = 0, rp = 0;
  CHECK(pbs_dataset_dims(data, &rn, &rp) == PBS_OK);
  CHECK(rn == n);
  CHECK(rp == p);

  oracle::Mat xm(30, 3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) xm(static_cast<long>(i), static_cast<long>(j)) = x[i * p + j];
  const oracle::Vec expect = oracle::ridge(xm, Eigen::Map<oracle::Vec>(y.data(), 30), 0.0);
  std::vector<double> beta(p);
  CHECK(pbs_ols_fit(data, beta.data()) == PBS_OK);
  for (std::size_t j = 0; j < p; ++j) CHECK(beta[j] == doctest::Approx(expect(static_cast<long>(j))));
  double s2 = 0;
  CHECK(pbs_unbiased_variance(data, &s2) == PBS_OK);
  CHECK(s2 > 0.0);

  const double grid[] = {0.0, 1.0, 10.0};
  pbs_selector* sel = nullptr;
  REQUIRE(pbs_selector_create(grid, 3, 0, 5, &sel) == PBS_OK);
  const std::size_t small[] = {0, 1}, full[] = {0, 1, 2};
  CHECK(pbs_selector_add_candidate(sel, 1, small, 2) == PBS_OK);
  CHECK(pbs_selector_add_candidate(sel, 2, full, 3) == PBS_OK);
  int id = 0;
  double lambda = -1;
  CHECK(pbs_select_fit(data, sel, beta.data(), &id, &lambda) == PBS_OK);
  CHECK((id == 1 || id == 2));

  pbs_fit* fit = nullptr;
  REQUIRE(pbs_fit_create(data, sel, 1.0, 0.0, 10, 7, 2, &fit) == PBS_OK);
  CHECK(pbs_fit_coefficients(fit, beta.data()) == PBS_OK);
  for (std::size_t j = 0; j < p; ++j) CHECK(beta[j] == doctest::Approx(expect(static_cast<long>(j))).epsilon(1e-10));
  const int ids[] = {1, 2};
  std::size_t counts[2] = {};
  CHECK(pbs_fit_selection_counts(fit, ids, 2, counts) == PBS_OK);
  CHECK(counts[1] == 10);
  const double x_new[] = {1.0, 0.5, -0.5};
  double pred = 0;
  CHECK(pbs_fit_predict(fit, x_new, &pred) == PBS_OK);
  pbs_interval iv{};
  CHECK(pbs_fit_interval(fit, x_new, 0.05, &iv) == PBS_DEGENERATE);
  CHECK(std::string(pbs_last_error()).size() > 0);
  pbs_fit_free(fit);

  REQUIRE(pbs_fit_create(data, sel, 0.5, 1.0, 50, 7, 1, &fit) == PBS_OK);
  CHECK(pbs_fit_interval(fit, x_new, 0.05, &iv) == PBS_OK);
  CHECK(iv.lower < iv.center);
  CHECK(iv.center < iv.upper);
  CHECK(std::string(pbs_last_error()).empty());
  pbs_fit_free(fit);

  const double s2grid[] = {0.5, 2.0}, ggrid[] = {0.0, 1.0};
  double chosen_s2 = 0, chosen_g = 0;
  CHECK(pbs_cv_select(data, sel, s2grid, 2, ggrid, 2, 3, 10, 1, 1, &chosen_s2, &chosen_g) == PBS_OK);
  CHECK((chosen_s2 == 0.5 || chosen_s2 == 2.0));

  pbs_selector_free(sel);
  pbs_dataset_free(data);
}

TEST_CASE("c api errors") {
  const double x[] = {1.0, 2.0, 2.0, 4.0};
  const double y[] = {1.0, 2.0};
  pbs_dataset* data = nullptr;
  REQUIRE(pbs_dataset_create(x, y, 2, 2, &data) == PBS_OK);
  double beta[2];
  CHECK(pbs_ols_fit(data, beta) == PBS_SINGULAR);
  CHECK(pbs_status_exit_code(PBS_SINGULAR) == 4);
  CHECK(pbs_status_exit_code(PBS_CONFIG) == 2);
  CHECK(pbs_status_exit_code(PBS_INGESTION) == 3);
  CHECK(pbs_status_exit_code(PBS_OK) == 0);
  CHECK(pbs_dataset_create(nullptr, y, 2, 2, &data) == PBS_INVALID_ARGUMENT);
  pbs_dataset_free(data);

  char* msg = nullptr;
  CHECK(pbs_run_command("fit", "{\"bogus\": 1}", &msg) == PBS_CONFIG);
  REQUIRE(msg);
  CHECK(std::string(msg).find("bogus") != std::string::npos);
  pbs_string_free(msg);
  CHECK(std::string(pbs_version()).size() > 0);
}
