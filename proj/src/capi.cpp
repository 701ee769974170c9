#include "pbs/pbs.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "pbs/app.hpp"
#include "pbs/bootstrap.hpp"
#include "pbs/distribution_selector.hpp"
#include "pbs/error.hpp"

struct pbs_dataset {
  pbs::Dataset data;
};

struct pbs_selector {
  pbs::SelectorConfig config;
};

struct pbs_fit {
  pbs::Dataset data;
  pbs::PbsFit fit;
};

namespace {

thread_local std::string last_error;

template <typename F>
pbs_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return PBS_OK;
  } catch (const pbs::Error& e) {
    last_error = e.what();
    return static_cast<pbs_status>(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown failure";
  }
  return PBS_INTERNAL;
}

void require(bool ok, const char* what) {
  if (!ok) pbs::fail(pbs::ErrorCode::InvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void copy_out(const pbs::Vector& v, double* dst) {
  for (pbs::Index i = 0; i < v.size(); ++i) dst[i] = v(i);
}

pbs::Vector copy_in(const double* src, pbs::Index n) {
  return Eigen::Map<const pbs::Vector>(src, n);
}

}  // namespace

extern "C" {

const char* pbs_last_error(void) { return last_error.c_str(); }

int pbs_status_exit_code(pbs_status status) {
  if (status == PBS_OK) return 0;
  if (status < PBS_INVALID_ARGUMENT || status > PBS_INTERNAL) return 1;
  return pbs::exit_code_for(static_cast<pbs::ErrorCode>(status));
}

const char* pbs_version(void) { return "1.0.0"; }

pbs_status pbs_dataset_create(const double* x, const double* y, size_t n, size_t p, pbs_dataset** out) {
  return guarded([&] {
    require(x && y && out, "null argument");
    require(n > 0 && p > 0, "dataset needs n, p >= 1");
    const auto rows = static_cast<pbs::Index>(n), cols = static_cast<pbs::Index>(p);
    pbs::Matrix m = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        x, rows, cols);
    *out = new pbs_dataset{pbs::Dataset(std::move(m), copy_in(y, rows))};
  });
}

void pbs_dataset_free(pbs_dataset* data) { delete data; }

pbs_status pbs_dataset_dims(const pbs_dataset* data, size_t* n, size_t* p) {
  return guarded([&] {
    require(data && n && p, "null argument");
    *n = static_cast<size_t>(data->data.n());
    *p = static_cast<size_t>(data->data.p());
  });
}

pbs_status pbs_ols_fit(const pbs_dataset* data, double* beta) {
  return guarded([&] {
    require(data && beta, "null argument");
    copy_out(pbs::ols_fit(data->data).coefficients, beta);
  });
}

pbs_status pbs_unbiased_variance(const pbs_dataset* data, double* sigma2) {
  return guarded([&] {
    require(data && sigma2, "null argument");
    *sigma2 = pbs::unbiased_variance(data->data, pbs::ols_fit(data->data));
  });
}

pbs_status pbs_selector_create(const double* lambda_grid, size_t lambda_count, int criterion, int folds,
                               pbs_selector** out) {
  return guarded([&] {
    require(out && (lambda_grid || lambda_count == 0), "null argument");
    require(criterion == 0 || criterion == 1, "criterion must be 0 (GCV) or 1 (K-fold)");
    auto s = std::make_unique<pbs_selector>();
    s->config.lambda_grid = lambda_count ? std::vector<double>(lambda_grid, lambda_grid + lambda_count)
                                         : pbs::default_lambda_grid();
    s->config.criterion = criterion == 0 ? pbs::Criterion::Gcv : pbs::Criterion::KFold;
    s->config.cv_folds = folds;
    *out = s.release();
  });
}

pbs_status pbs_selector_add_candidate(pbs_selector* selector, int id, const size_t* columns, size_t count) {
  return guarded([&] {
    require(selector && columns && count > 0, "candidate needs at least one column");
    pbs::CandidateModel m{id, {}};
    for (size_t i = 0; i < count; ++i) m.columns.push_back(static_cast<pbs::Index>(columns[i]));
    selector->config.candidates.push_back(std::move(m));
  });
}

void pbs_selector_free(pbs_selector* selector) { delete selector; }

namespace {
pbs::SelectorConfig resolved(const pbs_selector* selector, pbs::Index p) {
  pbs::SelectorConfig cfg = selector->config;
  if (cfg.candidates.empty()) cfg.candidates.push_back(pbs::full_model(p, 1));
  pbs::validate_selector(cfg, p);
  return cfg;
}
}  // namespace

pbs_status pbs_select_fit(const pbs_dataset* data, const pbs_selector* selector, double* beta, int* model_id,
                          double* lambda) {
  return guarded([&] {
    require(data && selector && beta, "null argument");
    const pbs::FitResult r = pbs::select_fit(data->data, resolved(selector, data->data.p()));
    copy_out(r.coefficients, beta);
    if (model_id) *model_id = r.model_id;
    if (lambda) *lambda = r.lambda;
  });
}

pbs_status pbs_fit_create(const pbs_dataset* data, const pbs_selector* selector, double gamma, double sigma2,
                          size_t bootstrap_size, uint64_t seed, unsigned threads, pbs_fit** out) {
  return guarded([&] {
    require(data && selector && out, "null argument");
    require(bootstrap_size > 0, "bootstrap size must be >= 1");
    pbs::PbsOptions options;
    options.threads = threads == 0 ? 1 : threads;
    options.store_responses = false;
    auto fit = pbs::pbs_fit(data->data, {gamma, sigma2}, static_cast<pbs::Index>(bootstrap_size),
                            resolved(selector, data->data.p()), seed, options);
    *out = new pbs_fit{data->data, std::move(fit)};
  });
}

void pbs_fit_free(pbs_fit* fit) { delete fit; }

pbs_status pbs_fit_coefficients(const pbs_fit* fit, double* beta) {
  return guarded([&] {
    require(fit && beta, "null argument");
    copy_out(fit->fit.beta_pbs, beta);
  });
}

pbs_status pbs_fit_predict(const pbs_fit* fit, const double* x_new, double* prediction) {
  return guarded([&] {
    require(fit && x_new && prediction, "null argument");
    *prediction = pbs::pbs_predict(fit->fit, copy_in(x_new, fit->data.p()));
  });
}

pbs_status pbs_fit_selection_counts(const pbs_fit* fit, const int* model_ids, size_t count, size_t* counts) {
  return guarded([&] {
    require(fit && (model_ids || count == 0) && (counts || count == 0), "null argument");
    for (size_t i = 0; i < count; ++i) {
      counts[i] = 0;
      for (const auto& r : fit->fit.replicates)
        if (r.model_id == model_ids[i]) ++counts[i];
    }
  });
}

pbs_status pbs_fit_interval(const pbs_fit* fit, const double* x_new, double alpha, pbs_interval* out) {
  return guarded([&] {
    require(fit && x_new && out, "null argument");
    const pbs::PredictionInterval pi =
        pbs::prediction_interval(fit->fit, fit->data, copy_in(x_new, fit->data.p()), alpha);
    *out = {pi.center, pi.lower(), pi.upper(), pi.smoothing_variance, pi.residual_variance};
  });
}

pbs_status pbs_cv_select(const pbs_dataset* data, const pbs_selector* selector, const double* sigma2_grid,
                         size_t sigma2_count, const double* gamma_grid, size_t gamma_count, int folds,
                         size_t bootstrap_size, uint64_t seed, unsigned threads, double* sigma2,
                         double* gamma) {
  return guarded([&] {
    require(data && selector && sigma2_grid && gamma_grid && sigma2 && gamma, "null argument");
    pbs::CvGrid grid;
    grid.sigma2_candidates.assign(sigma2_grid, sigma2_grid + sigma2_count);
    grid.gamma_candidates.assign(gamma_grid, gamma_grid + gamma_count);
    grid.folds = folds;
    grid.bootstrap_size = static_cast<pbs::Index>(bootstrap_size);
    grid.seed = seed;
    const pbs::CvSurface s = pbs::cv_error_surface(data->data, grid, resolved(selector, data->data.p()),
                                                   threads == 0 ? 1 : threads);
    *sigma2 = s.selected.sigma2;
    *gamma = s.selected.gamma;
  });
}

pbs_status pbs_run_command(const char* command, const char* config_json, char** message) {
  std::string summary;
  const pbs_status status = guarded([&] {
    require(command && config_json, "null argument");
    summary = pbs::app::run_command(command, config_json);
  });
  if (message) *message = dup_string(status == PBS_OK ? summary : last_error);
  return status;
}

void pbs_string_free(char* text) { std::free(text); }

}  // extern "C"
