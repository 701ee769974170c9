#ifndef PBS_PBS_H
#define PBS_PBS_H

#include <stddef.h>
#include <stdint.h>

#if defined(PBS_BUILDING_LIBRARY)
#define PBS_API __attribute__((visibility("default")))
#else
#define PBS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pbs_status {
  PBS_OK = 0,
  PBS_INVALID_ARGUMENT = 1,
  PBS_SINGULAR = 2,
  PBS_DEGREES_OF_FREEDOM = 3,
  PBS_DEGENERATE = 4,
  PBS_SELECTION_FAILURE = 5,
  PBS_INGESTION = 6,
  PBS_CONFIG = 7,
  PBS_IO = 8,
  PBS_INTERNAL = 9
} pbs_status;

typedef struct pbs_dataset pbs_dataset;
typedef struct pbs_selector pbs_selector;
typedef struct pbs_fit pbs_fit;

typedef struct pbs_interval {
  double center;
  double lower;
  double upper;
  double smoothing_variance;
  double residual_variance;
} pbs_interval;

/* Message of the last failing call on this thread; "" after success. */
PBS_API const char* pbs_last_error(void);
/* Process exit code for a status: 0 ok, 2 config, 3 ingestion, 4 numerical, 1 other. */
PBS_API int pbs_status_exit_code(pbs_status status);
PBS_API const char* pbs_version(void);

/* x is n x p in row-major order. */
PBS_API pbs_status pbs_dataset_create(const double* x, const double* y, size_t n, size_t p,
                                      pbs_dataset** out);
PBS_API void pbs_dataset_free(pbs_dataset* data);
PBS_API pbs_status pbs_dataset_dims(const pbs_dataset* data, size_t* n, size_t* p);
/* beta has room for p values. */
PBS_API pbs_status pbs_ols_fit(const pbs_dataset* data, double* beta);
PBS_API pbs_status pbs_unbiased_variance(const pbs_dataset* data, double* sigma2);

/* criterion: 0 = GCV, 1 = contiguous K-fold with `folds` blocks. */
PBS_API pbs_status pbs_selector_create(const double* lambda_grid, size_t lambda_count, int criterion,
                                       int folds, pbs_selector** out);
/* columns are 0-based indices into the design. */
PBS_API pbs_status pbs_selector_add_candidate(pbs_selector* selector, int id, const size_t* columns,
                                             size_t count);
PBS_API void pbs_selector_free(pbs_selector* selector);
/* Joint (model, lambda) choice on the observed response. beta has room for p values. */
PBS_API pbs_status pbs_select_fit(const pbs_dataset* data, const pbs_selector* selector, double* beta,
                                  int* model_id, double* lambda);

PBS_API pbs_status pbs_fit_create(const pbs_dataset* data, const pbs_selector* selector, double gamma,
                                  double sigma2, size_t bootstrap_size, uint64_t seed, unsigned threads,
                                  pbs_fit** out);
PBS_API void pbs_fit_free(pbs_fit* fit);
PBS_API pbs_status pbs_fit_coefficients(const pbs_fit* fit, double* beta);
PBS_API pbs_status pbs_fit_predict(const pbs_fit* fit, const double* x_new, double* prediction);
/* counts[i] = number of replicates that chose model_ids[i]. */
PBS_API pbs_status pbs_fit_selection_counts(const pbs_fit* fit, const int* model_ids, size_t count,
                                            size_t* counts);
PBS_API pbs_status pbs_fit_interval(const pbs_fit* fit, const double* x_new, double alpha,
                                    pbs_interval* out);

/* Cross-validated choice of (sigma2, gamma) over the given grids. */
PBS_API pbs_status pbs_cv_select(const pbs_dataset* data, const pbs_selector* selector,
                                 const double* sigma2_grid, size_t sigma2_count, const double* gamma_grid,
                                 size_t gamma_count, int folds, size_t bootstrap_size, uint64_t seed,
                                 unsigned threads, double* sigma2, double* gamma);

/* Runs a CLI command with a JSON configuration. On return *message (if
   non-null) holds a summary or error text to release with pbs_string_free. */
PBS_API pbs_status pbs_run_command(const char* command, const char* config_json, char** message);
PBS_API void pbs_string_free(char* text);

#ifdef __cplusplus
}
#endif

#endif
