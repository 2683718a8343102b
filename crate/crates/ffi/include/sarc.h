#ifndef SARC_H
#define SARC_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SarcStatus {
  SARC_STATUS_OK = 0,
  SARC_STATUS_NULL_POINTER = 1,
  SARC_STATUS_INVALID_ARGUMENT = 2,
  SARC_STATUS_IO = 3,
  SARC_STATUS_PARSE = 4,
  // A numerical routine failed (degenerate curvature, root bracketing).
  SARC_STATUS_NUMERICAL = 5,
  // A Rust panic was caught at the boundary.
  SARC_STATUS_INTERNAL = 6,
} SarcStatus;

typedef enum SarcLoss {
  SARC_LOSS_RIDGE_LEAST_SQUARES = 0,
  SARC_LOSS_LOGISTIC = 1,
  SARC_LOSS_NONCONVEX_SVM = 2,
} SarcLoss;

typedef enum SarcRidge {
  // `λ‖x‖²`
  SARC_RIDGE_FULL = 0,
  // `(λ/2)‖x‖²`
  SARC_RIDGE_HALF = 1,
} SarcRidge;

typedef enum SarcAlgorithm {
  SARC_ALGORITHM_SARC = 0,
  SARC_ALGORITHM_SAARC = 1,
  SARC_ALGORITHM_SACR = 2,
  SARC_ALGORITHM_CR = 3,
  SARC_ALGORITHM_ACR = 4,
  SARC_ALGORITHM_AGD = 5,
  SARC_ALGORITHM_SGD = 6,
  SARC_ALGORITHM_LBFGS = 7,
} SarcAlgorithm;

typedef enum SarcScheme {
  SARC_SCHEME_UNIFORM = 0,
  SARC_SCHEME_NONUNIFORM = 1,
} SarcScheme;

typedef enum SarcRunStatus {
  SARC_RUN_STATUS_CONVERGED = 0,
  SARC_RUN_STATUS_STATIONARY = 1,
  SARC_RUN_STATUS_MAX_ITERS = 2,
  SARC_RUN_STATUS_DIVERGED = 3,
} SarcRunStatus;

typedef enum SarcPhase {
  SARC_PHASE_SARC = 0,
  SARC_PHASE_PHASE1 = 1,
  SARC_PHASE_PHASE2 = 2,
  SARC_PHASE_FIRST_ORDER = 3,
} SarcPhase;

typedef struct SarcDataset SarcDataset;

typedef struct SarcModel SarcModel;

typedef struct SarcRun SarcRun;

// Solver settings. Start from [`sarc_config_default`] and override fields.
typedef struct SarcConfig {
  enum SarcAlgorithm algorithm;
  // Hessian sampling for SARC, SAARC and SACR (CR and ACR are exact).
  enum SarcScheme scheme;
  double gamma1;
  double gamma2;
  double gamma3;
  double eta;
  double sigma_min;
  double sigma0;
  double kappa_theta;
  double eps;
  double delta;
  size_t max_iters;
  double grad_tol;
  // SGD minibatch size.
  size_t batch_size;
  size_t lbfgs_memory;
  // Seeds the samplers and, when no `x0` is passed, the initial point.
  uint64_t seed;
  // Standard deviation of the Gaussian initial point drawn when `x0` is `NULL`.
  double x0_std;
} SarcConfig;

typedef struct SarcSummary {
  enum SarcRunStatus status;
  size_t iterations;
  size_t successes;
  double epochs;
  double f;
  double grad_norm;
  size_t records;
  size_t d;
} SarcSummary;

// One trace row. Row 0 describes the starting point.
typedef struct SarcRecord {
  size_t iter;
  double epochs;
  double f;
  double grad_norm;
  double sigma;
  double eps_i;
  size_t sample_size;
  bool success;
  enum SarcPhase phase;
} SarcRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or `NULL`. The pointer
// stays valid until the next failing call on the same thread.
const char *sarc_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *sarc_version(void);

// Loads a LIBSVM file. `positive_label` selects the label mapped to +1;
// pass NaN to map `{-1, +1}` or any two-valued label set automatically.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum SarcStatus sarc_dataset_load_libsvm(const char *path,
                                         double positive_label,
                                         struct SarcDataset **out);

// Seeded synthetic binary classification data; the first row is scaled by
// `skew` and rows have expected norm `row_scale`.
//
// # Safety
// `out` must be a valid pointer.
enum SarcStatus sarc_dataset_synthetic(size_t n,
                                       size_t d,
                                       uint64_t seed,
                                       double skew,
                                       double row_scale,
                                       struct SarcDataset **out);

// # Safety
// `dataset` must come from this library; outputs may be `NULL`.
enum SarcStatus sarc_dataset_dims(const struct SarcDataset *dataset, size_t *n, size_t *d);

// # Safety
// `dataset` must come from this library or be `NULL`.
void sarc_dataset_free(struct SarcDataset *dataset);

// Finite-sum model over `dataset`. The model keeps its own reference, so
// the dataset handle may be freed afterwards.
//
// # Safety
// `dataset` must come from this library and `out` be a valid pointer.
enum SarcStatus sarc_model_new(const struct SarcDataset *dataset,
                               enum SarcLoss loss,
                               double lambda,
                               enum SarcRidge ridge,
                               struct SarcModel **out);

// # Safety
// `model` must come from this library; outputs may be `NULL`.
enum SarcStatus sarc_model_dims(const struct SarcModel *model, size_t *n, size_t *d);

// `f(x)`; `len` must equal the model dimension.
//
// # Safety
// `x` must point to `len` doubles and `value` be a valid pointer.
enum SarcStatus sarc_model_value(const struct SarcModel *model,
                                 const double *x,
                                 size_t len,
                                 double *value);

// `∇f(x)` into `grad` (both of length `len`); `value` receives `f(x)`
// unless it is `NULL`.
//
// # Safety
// `x` and `grad` must point to `len` doubles.
enum SarcStatus sarc_model_gradient(const struct SarcModel *model,
                                    const double *x,
                                    size_t len,
                                    double *grad,
                                    double *value);

// # Safety
// `model` must come from this library or be `NULL`.
void sarc_model_free(struct SarcModel *model);

// Library defaults with the SARC algorithm and uniform sampling.
//
// # Safety
// `config` must be a valid pointer.
enum SarcStatus sarc_config_default(struct SarcConfig *config);

// Runs the configured algorithm from `x0` (length `len`), or from a
// Gaussian point drawn with `config->x0_std` and `config->seed` when `x0`
// is `NULL`.
//
// # Safety
// `model`, `config` and `out` must be valid; `x0` is `NULL` or points to
// `len` doubles.
enum SarcStatus sarc_run(const struct SarcModel *model,
                         const struct SarcConfig *config,
                         const double *x0,
                         size_t len,
                         struct SarcRun **out);

// # Safety
// `run` and `summary` must be valid pointers.
enum SarcStatus sarc_run_summary(const struct SarcRun *run, struct SarcSummary *summary);

// Trace row `index` (`0 ≤ index < summary.records`).
//
// # Safety
// `run` and `record` must be valid pointers.
enum SarcStatus sarc_run_record(const struct SarcRun *run, size_t index, struct SarcRecord *record);

// Final iterate into `x` (length `len`, equal to the model dimension).
//
// # Safety
// `x` must point to `len` doubles.
enum SarcStatus sarc_run_solution(const struct SarcRun *run, double *x, size_t len);

// Writes the trace as CSV, creating parent directories.
//
// # Safety
// `path` must be a NUL-terminated string.
enum SarcStatus sarc_run_write_csv(const struct SarcRun *run, const char *path);

// # Safety
// `run` must come from this library or be `NULL`.
void sarc_run_free(struct SarcRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SARC_H */
