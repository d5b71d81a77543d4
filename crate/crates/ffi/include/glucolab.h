#ifndef GLUCOLAB_H
#define GLUCOLAB_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Length of the feature vector written by the environment functions.
 */
#define GLUCOLAB_FEATURE_DIM 12

typedef enum GlucolabStatus {
  GLUCOLAB_STATUS_OK = 0,
  GLUCOLAB_STATUS_NULL_POINTER = 1,
  GLUCOLAB_STATUS_INVALID_ARGUMENT = 2,
  /**
   * unreadable, missing or corrupt file
   */
  GLUCOLAB_STATUS_IO = 3,
  GLUCOLAB_STATUS_EPISODE_DONE = 4,
  /**
   * the simulation or a computation produced non-finite values
   */
  GLUCOLAB_STATUS_NUMERICAL = 5,
  GLUCOLAB_STATUS_INTERNAL = 6,
} GlucolabStatus;

/**
 * Opaque environment handle.
 */
typedef struct GlucolabEnv GlucolabEnv;

/**
 * Opaque policy handle.
 */
typedef struct GlucolabPolicy GlucolabPolicy;

/**
 * Per-trace glycemic metrics, all in percent.
 */
typedef struct GlucolabMetrics {
  double tir_pct;
  double tbr_pct;
  double tar_pct;
  double cv_pct;
} GlucolabMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length in
 * bytes, or 0 when there is no message.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t glucolab_last_error_message(char *buf, size_t len);

/**
 * Magni risk of a glucose value in mg/dl.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum GlucolabStatus glucolab_magni_risk(double glucose_mg_dl, double *out);

/**
 * TIR, TBR, TAR and CV of a CGM trace.
 *
 * # Safety
 * `cgm` must be valid for `n` reads and `out` for one write.
 */
enum GlucolabStatus glucolab_metrics(const double *cgm, size_t n, struct GlucolabMetrics *out);

/**
 * Creates an environment for a built-in patient with default settings and
 * an episode of `length_days`.
 *
 * # Safety
 * `patient_id` must be a NUL-terminated string and `out` valid for writes.
 */
enum GlucolabStatus glucolab_env_new(const char *patient_id,
                                     uint64_t seed,
                                     uint64_t episode,
                                     double length_days,
                                     struct GlucolabEnv **out);

/**
 * # Safety
 * `env` must be null or a handle from [`glucolab_env_new`] not yet freed.
 */
void glucolab_env_free(struct GlucolabEnv *env);

/**
 * Writes the current feature vector (`GLUCOLAB_FEATURE_DIM` values) and
 * the latest CGM reading.
 *
 * # Safety
 * `env` must be a live handle, `features` valid for `GLUCOLAB_FEATURE_DIM`
 * writes and `cgm` null or valid for one write.
 */
enum GlucolabStatus glucolab_env_observation(const struct GlucolabEnv *env,
                                             double *features,
                                             double *cgm);

/**
 * Advances one control period with a normalized action in [-1, 1]. Writes
 * the next features, the reward and whether the episode ended.
 *
 * # Safety
 * `env` must be a live handle; `features` valid for
 * `GLUCOLAB_FEATURE_DIM` writes; `reward` and `done` valid for one write.
 */
enum GlucolabStatus glucolab_env_step(struct GlucolabEnv *env,
                                      double action,
                                      double *features,
                                      double *reward,
                                      bool *done);

/**
 * Plasma glucose of the simulated patient, mg/dl.
 *
 * # Safety
 * `env` must be a live handle and `out` valid for one write.
 */
enum GlucolabStatus glucolab_env_true_glucose(const struct GlucolabEnv *env, double *out);

/**
 * Loads a policy file written by the `train` command.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for writes.
 */
enum GlucolabStatus glucolab_policy_load(const char *path, struct GlucolabPolicy **out);

/**
 * # Safety
 * `policy` must be null or a handle from [`glucolab_policy_load`] not yet
 * freed.
 */
void glucolab_policy_free(struct GlucolabPolicy *policy);

/**
 * Normalized action for raw (unstandardized) features.
 *
 * # Safety
 * `policy` must be a live handle, `features` valid for `n` reads and
 * `action` for one write.
 */
enum GlucolabStatus glucolab_policy_act(const struct GlucolabPolicy *policy,
                                        const double *features,
                                        size_t n,
                                        double *action);

/**
 * Library version as a static NUL-terminated string.
 */
const char *glucolab_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GLUCOLAB_H */
