#ifndef OVERUSE_SIM_H
#define OVERUSE_SIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OsimStatus {
  OSIM_STATUS_OK = 0,
  OSIM_STATUS_NULL_POINTER = 1,
  OSIM_STATUS_INVALID_UTF8 = 2,
  OSIM_STATUS_INVALID_CONFIG = 3,
  OSIM_STATUS_INVALID_ENVIRONMENT = 4,
  OSIM_STATUS_IO = 5,
  OSIM_STATUS_OUT_OF_RANGE = 6,
  OSIM_STATUS_INTERNAL = 7,
  OSIM_STATUS_PANIC = 8,
} OsimStatus;

/**
 * The aggregated outcome of one batch of replications.
 */
typedef struct OsimBatch OsimBatch;

/**
 * A validated experiment configuration.
 */
typedef struct OsimConfig OsimConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next `osim_*` call on the same thread.
 */
const char *osim_last_error_message(void);

/**
 * # Safety
 * `s` must be NULL or a string previously returned by this library.
 */
void osim_string_free(char *s);

/**
 * Parses and validates a JSON config, filling in defaults.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum OsimStatus osim_config_from_json(const char *json, struct OsimConfig **out);

/**
 * Default config for a built-in level (`simplified`, `advanced`, `refined`).
 *
 * # Safety
 * `level` must be a NUL-terminated string; `out` must be writable.
 */
enum OsimStatus osim_config_new(const char *level, struct OsimConfig **out);

/**
 * Fully resolved config as pretty-printed JSON; free with `osim_string_free`.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum OsimStatus osim_config_to_json(const struct OsimConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must be NULL or a handle not yet freed.
 */
void osim_config_free(struct OsimConfig *cfg);

/**
 * Runs every replication of `cfg` on up to `threads` workers (0 = automatic).
 * The result does not depend on `threads`.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum OsimStatus osim_run_batch(const struct OsimConfig *cfg,
                               size_t threads,
                               struct OsimBatch **out);

/**
 * # Safety
 * `batch` must be NULL or a handle not yet freed.
 */
void osim_batch_free(struct OsimBatch *batch);

/**
 * # Safety
 * `batch` must be a live handle; `out` must be writable.
 */
enum OsimStatus osim_batch_horizon(const struct OsimBatch *batch, size_t *out);

/**
 * # Safety
 * `batch` must be a live handle; `out` must be writable.
 */
enum OsimStatus osim_batch_n_replications(const struct OsimBatch *batch, size_t *out);

/**
 * Number of recommender arms; 0 for environments without a recommender.
 *
 * # Safety
 * `batch` must be a live handle; `out` must be writable.
 */
enum OsimStatus osim_batch_n_arms(const struct OsimBatch *batch, size_t *out);

/**
 * Replications not addicted after step `t`.
 *
 * # Safety
 * `batch` must be a live handle; `out` must be writable.
 */
enum OsimStatus osim_batch_non_addicted(const struct OsimBatch *batch, size_t t, size_t *out);

/**
 * Mean bandit estimate of `arm` across replications after step `t`.
 *
 * # Safety
 * `batch` must be a live handle; `out` must be writable.
 */
enum OsimStatus osim_batch_mean_q(const struct OsimBatch *batch, size_t t, size_t arm, double *out);

/**
 * Writes the batch CSVs and `resolved_config.json` into `dir`.
 *
 * # Safety
 * `batch` must be a live handle; `dir` must be a NUL-terminated string.
 */
enum OsimStatus osim_batch_write_csv(const struct OsimBatch *batch, const char *dir);

/**
 * A built-in environment as JSON; free with `osim_string_free`.
 *
 * # Safety
 * `level` must be a NUL-terminated string; `out` must be writable.
 */
enum OsimStatus osim_env_dump_json(const char *level, bool misrepresent, char **out);

/**
 * Seed of replication `index` in a batch with base seed `base`.
 */
uint64_t osim_derive_seed(uint64_t base, uint64_t index);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OVERUSE_SIM_H */
