#ifndef AFLOW_H
#define AFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum AflowStatus {
  AFLOW_STATUS_OK = 0,
  AFLOW_STATUS_INVALID_ARGUMENT = 1,
  AFLOW_STATUS_DATA_ERROR = 2,
  AFLOW_STATUS_NUMERICAL_ERROR = 3,
  AFLOW_STATUS_NULL_POINTER = 4,
  AFLOW_STATUS_PANIC = 5,
} AflowStatus;

// Loaded and validated dataset.
typedef struct AflowDataset AflowDataset;

// Persistent network extracted from a dataset.
typedef struct AflowPersistentNetwork AflowPersistentNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next call on this thread.
const char *aflow_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *aflow_version(void);

// Loads the dataset in directory `dir`.
//
// # Safety
// `dir` must be a NUL-terminated string and `out` a writable pointer.
enum AflowStatus aflow_dataset_load(const char *dir, struct AflowDataset **out);

// Releases a dataset; null is ignored.
//
// # Safety
// `ds` must come from [`aflow_dataset_load`] and not be used afterwards.
void aflow_dataset_free(struct AflowDataset *ds);

// Number of in-corpus videos and observed days.
//
// # Safety
// `ds` must be a live handle; outputs must be writable.
enum AflowStatus aflow_dataset_shape(const struct AflowDataset *ds, size_t *videos, size_t *days);

// Extracts the persistent network with default view filters.
//
// # Safety
// `ds` must be a live handle and `out` writable.
enum AflowStatus aflow_persistent_network_extract(const struct AflowDataset *ds,
                                                  uint32_t cutoff,
                                                  struct AflowPersistentNetwork **out);

// Link and target counts of a persistent network.
//
// # Safety
// `pn` must be a live handle; outputs must be writable.
enum AflowStatus aflow_persistent_network_size(const struct AflowPersistentNetwork *pn,
                                               size_t *links,
                                               size_t *targets);

// Releases a persistent network; null is ignored.
//
// # Safety
// `pn` must come from [`aflow_persistent_network_extract`] and not be used afterwards.
void aflow_persistent_network_free(struct AflowPersistentNetwork *pn);

// SMAPE (0..200) of `n` predictions.
//
// # Safety
// `y` and `y_hat` must point to `n` values; `out` must be writable.
enum AflowStatus aflow_smape(const double *y, const double *y_hat, size_t n, double *out);

// Gini coefficient of `n` non-negative values.
//
// # Safety
// `values` must point to `n` values; `out` must be writable.
enum AflowStatus aflow_gini(const double *values, size_t n, double *out);

// Spearman rank correlation of two series of length `n`.
//
// # Safety
// `x` and `y` must point to `n` values; `out` must be writable.
enum AflowStatus aflow_spearman(const double *x, const double *y, size_t n, double *out);

// Two-sided Pearson test; writes r and the p-value.
//
// # Safety
// `x` and `y` must point to `n` values; outputs must be writable.
enum AflowStatus aflow_pearson_test(const double *x,
                                    const double *y,
                                    size_t n,
                                    double *r,
                                    double *p);

// Fraction of simulated links with daily presence `p_link` that persist.
//
// # Safety
// `out` must be writable.
enum AflowStatus aflow_simulate_persistence(double p_link,
                                            size_t days,
                                            size_t trials,
                                            uint64_t seed,
                                            double *out);

// Fits ARNet on a target series of length `n` with `k` neighbour series
// stored row by row in `neighbors` (`k * n` values). Writes `p` lag
// coefficients to `alpha` and `k` link strengths to `beta`.
//
// # Safety
// Pointers must reference buffers of the stated sizes.
enum AflowStatus aflow_fit_arnet(const double *target,
                                 size_t n,
                                 const double *neighbors,
                                 size_t k,
                                 size_t p,
                                 double *alpha,
                                 double *beta);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AFLOW_H */
