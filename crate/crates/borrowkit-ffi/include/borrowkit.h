/* C interface to the borrowkit statistical library. Generated; do not edit. */

#ifndef BORROWKIT_H
#define BORROWKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible function.
 */
typedef enum BkStatus {
  /**
   * Success.
   */
  BK_STATUS_OK = 0,
  /**
   * Runtime failure (I/O, parse, or statistical degeneracy).
   */
  BK_STATUS_RUNTIME = 1,
  /**
   * Invalid input: bad schema, configuration, or argument.
   */
  BK_STATUS_INVALID = 2,
  /**
   * A required pointer argument was NULL.
   */
  BK_STATUS_NULL_POINTER = 3,
  /**
   * A string argument was not valid UTF-8.
   */
  BK_STATUS_INVALID_UTF8 = 4,
  /**
   * An internal panic was caught at the boundary.
   */
  BK_STATUS_PANIC = 5,
} BkStatus;

/**
 * Opaque dataset handle produced by `bk_dataset_read_csv`.
 */
typedef struct BkDataset BkDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the library version as a static NUL-terminated string.
 * The pointer is valid for the life of the process; do not free it.
 */
const char *bk_version(void);

/**
 * Returns a copy of the last error message for this thread, or NULL when the
 * previous call succeeded. Release the copy with `bk_string_free`.
 */
char *bk_last_error_message(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must be NULL or a pointer previously returned by a `bk_` function that
 * documents `bk_string_free` as its deallocator, and not freed before.
 */
void bk_string_free(char *s);

/**
 * Reads an analysis dataset from a CSV file.
 *
 * `covariate_columns` is an array of `n_covariates` column names. On success
 * writes a new handle to `out`; release it with `bk_dataset_free`.
 *
 * # Safety
 * All string arguments must be NUL-terminated; `covariate_columns` must
 * point to `n_covariates` valid strings (it may be NULL when
 * `n_covariates` is zero); `out` must be a valid pointer.
 */
enum BkStatus bk_dataset_read_csv(const char *path,
                                  const char *outcome_column,
                                  const char *treatment_column,
                                  const char *source_column,
                                  const char *const *covariate_columns,
                                  size_t n_covariates,
                                  struct BkDataset **out);

/**
 * Writes the arm sizes of a dataset. Any of the out-pointers may be NULL to
 * skip that count.
 *
 * # Safety
 * `dataset` must be a live handle from `bk_dataset_read_csv`.
 */
enum BkStatus bk_dataset_counts(const struct BkDataset *dataset,
                                size_t *n_treated,
                                size_t *n_control,
                                size_t *n_external);

/**
 * Releases a dataset handle. NULL is ignored.
 *
 * # Safety
 * `dataset` must be NULL or a handle from `bk_dataset_read_csv` that has not
 * been freed before.
 */
void bk_dataset_free(struct BkDataset *dataset);

/**
 * Runs the borrowing analysis described by a JSON configuration and writes
 * the full report as a JSON string to `out`.
 *
 * The configuration uses the same schema as the CLI `analyze` subcommand;
 * its column names must match the ones the dataset was read with.
 *
 * # Safety
 * `dataset` must be a live handle; `config_json` must be NUL-terminated;
 * `out` must be a valid pointer. Free the result with `bk_string_free`.
 */
enum BkStatus bk_analyze_json(const struct BkDataset *dataset, const char *config_json, char **out);

/**
 * Computes the mean/variance compatibility indices and calibrated borrowing
 * strengths for a dataset, writing them as a JSON string to `out`.
 *
 * # Safety
 * Same contract as `bk_analyze_json`.
 */
enum BkStatus bk_mpi_json(const struct BkDataset *dataset, const char *config_json, char **out);

/**
 * Runs a simulation study from a JSON study configuration and writes the
 * full trace (configuration echo, metric rows, calibration records) as a
 * JSON string to `out`.
 *
 * # Safety
 * `config_json` must be NUL-terminated; `out` must be a valid pointer. Free
 * the result with `bk_string_free`.
 */
enum BkStatus bk_simulate_json(const char *config_json, char **out);

/**
 * Writes the built-in simulation scenario table as a CSV string to `out`.
 * Free the result with `bk_string_free`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum BkStatus bk_scenarios_csv(char **out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* BORROWKIT_H */
