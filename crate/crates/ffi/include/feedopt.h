#ifndef FEEDOPT_H
#define FEEDOPT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum FeedoptStatus {
  FEEDOPT_STATUS_OK = 0,
  FEEDOPT_STATUS_NULL_POINTER = 1,
  FEEDOPT_STATUS_INVALID_UTF8 = 2,
  FEEDOPT_STATUS_PARSE_ERROR = 3,
  FEEDOPT_STATUS_INVALID_ARGUMENT = 4,
  FEEDOPT_STATUS_NUMERICAL_ERROR = 5,
  FEEDOPT_STATUS_IO_ERROR = 6,
  FEEDOPT_STATUS_UNKNOWN_EXPERIMENT = 7,
  FEEDOPT_STATUS_OUT_OF_RANGE = 8,
  FEEDOPT_STATUS_BUFFER_TOO_SMALL = 9,
  FEEDOPT_STATUS_PANIC = 10,
} FeedoptStatus;

/**
 * A simulated hybrid arc with its monitor series.
 */
typedef struct FeedoptArc FeedoptArc;

/**
 * A parsed scenario.
 */
typedef struct FeedoptScenario FeedoptScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last call on this thread, or null if it succeeded. Valid
 * until the next call into this library from the same thread.
 */
const char *feedopt_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *feedopt_version(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void feedopt_string_free(char *s);

/**
 * Loads a scenario file.
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` is writable.
 */
enum FeedoptStatus feedopt_scenario_load(const char *path, struct FeedoptScenario **out);

/**
 * Parses a scenario document held in memory.
 *
 * # Safety
 * `text` is a NUL-terminated string; `out` is writable.
 */
enum FeedoptStatus feedopt_scenario_parse(const char *text, struct FeedoptScenario **out);

/**
 * # Safety
 * `sc` comes from `feedopt_scenario_load`/`_parse` or is null.
 */
void feedopt_scenario_free(struct FeedoptScenario *sc);

/**
 * Plant dimensions and mode count. Any output pointer may be null.
 *
 * # Safety
 * `sc` is a live handle.
 */
enum FeedoptStatus feedopt_scenario_dims(const struct FeedoptScenario *sc,
                                         size_t *n,
                                         size_t *m,
                                         size_t *p,
                                         size_t *q,
                                         size_t *modes);

/**
 * Evaluates the certificates. `all_pass` receives 1 or 0; `report`, if not
 * null, receives the text report (free with `feedopt_string_free`).
 *
 * # Safety
 * `sc` is a live handle; `all_pass` is writable.
 */
enum FeedoptStatus feedopt_scenario_check(const struct FeedoptScenario *sc,
                                          int32_t *all_pass,
                                          char **report);

/**
 * Simulates the scenario. Divergence is not an error; see `feedopt_arc_summary`.
 *
 * # Safety
 * `sc` is a live handle; `out` is writable.
 */
enum FeedoptStatus feedopt_simulate(const struct FeedoptScenario *sc, struct FeedoptArc **out);

/**
 * # Safety
 * `arc` comes from `feedopt_simulate` or is null.
 */
void feedopt_arc_free(struct FeedoptArc *arc);

/**
 * Number of samples; 0 for a null handle.
 *
 * # Safety
 * `arc` is a live handle or null.
 */
size_t feedopt_arc_len(const struct FeedoptArc *arc);

/**
 * Length of the state vector: n plus the controller dimension.
 *
 * # Safety
 * `arc` is a live handle or null.
 */
size_t feedopt_arc_state_dim(const struct FeedoptArc *arc);

/**
 * Reads sample `index`. `state` receives `feedopt_arc_state_dim` values
 * and may be null to skip; `sigma` is 1-based.
 *
 * # Safety
 * `arc` is a live handle; output pointers are writable; `state` holds
 * `state_len` doubles.
 */
enum FeedoptStatus feedopt_arc_sample(const struct FeedoptArc *arc,
                                      size_t index,
                                      double *t,
                                      size_t *j,
                                      size_t *sigma,
                                      double *err_track,
                                      double *state,
                                      size_t state_len);

/**
 * Run summary. `diverged_at` is NaN unless `diverged` is 1. Output pointers
 * may be null.
 *
 * # Safety
 * `arc` is a live handle.
 */
enum FeedoptStatus feedopt_arc_summary(const struct FeedoptArc *arc,
                                       double *final_error,
                                       size_t *plant_switches,
                                       size_t *controller_resets,
                                       int32_t *diverged,
                                       double *diverged_at);

/**
 * Writes the arc as CSV.
 *
 * # Safety
 * `arc` is a live handle; `path` is a NUL-terminated string.
 */
enum FeedoptStatus feedopt_arc_write_csv(const struct FeedoptArc *arc, const char *path);

/**
 * Runs a named experiment, writing its CSVs and summary into `out_dir`.
 * `all_pass` receives 1 if every check passed.
 *
 * # Safety
 * `name` and `out_dir` are NUL-terminated strings; `all_pass` is writable.
 */
enum FeedoptStatus feedopt_experiment_run(const char *name,
                                          uint64_t seed,
                                          const char *out_dir,
                                          int32_t *all_pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEEDOPT_H */
