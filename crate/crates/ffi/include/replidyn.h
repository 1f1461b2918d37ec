#ifndef REPLIDYN_H
#define REPLIDYN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ReplidynKind {
  REPLIDYN_KIND_STABLE = 0,
  REPLIDYN_KIND_ZERO_SUM_V1 = 1,
  REPLIDYN_KIND_ZERO_SUM_V2 = 2,
} ReplidynKind;

/**
 * Status codes. Values 0..=4 coincide with the CLI exit codes.
 */
typedef enum ReplidynStatus {
  REPLIDYN_STATUS_OK = 0,
  REPLIDYN_STATUS_CONFIG_ERROR = 1,
  REPLIDYN_STATUS_INVARIANT_VIOLATION = 2,
  REPLIDYN_STATUS_CERTIFICATE_FAILED = 3,
  REPLIDYN_STATUS_INSUFFICIENT_DATA = 4,
  REPLIDYN_STATUS_NULL_POINTER = 5,
  REPLIDYN_STATUS_INVALID_ARGUMENT = 6,
  REPLIDYN_STATUS_PANIC = 7,
} ReplidynStatus;

/**
 * A stored orbit.
 */
typedef struct ReplidynOrbit ReplidynOrbit;

/**
 * A replicator system (fitness map plus dynamics kind).
 */
typedef struct ReplidynSystem ReplidynSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread (empty after a success).
 * The pointer stays valid until the next call on the same thread.
 */
const char *replidyn_last_error(void);

/**
 * Library version as a static string.
 */
const char *replidyn_version(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void replidyn_string_free(char *s);

/**
 * Builds a system from a fitness document `{"m": .., "expr": {..}}`.
 *
 * # Safety
 * `fitness_json` must be a valid C string and `out` a valid pointer.
 */
enum ReplidynStatus replidyn_system_new(const char *fitness_json,
                                        enum ReplidynKind kind,
                                        struct ReplidynSystem **out);

/**
 * # Safety
 * `sys` must come from [`replidyn_system_new`] or be null.
 */
void replidyn_system_free(struct ReplidynSystem *sys);

/**
 * Number of strategies `m` (0 for a null handle).
 *
 * # Safety
 * `sys` must be a live handle or null.
 */
size_t replidyn_system_dim(const struct ReplidynSystem *sys);

/**
 * One step of the map in double precision; writes `m` values to `out`.
 *
 * # Safety
 * `x` and `out` must point to `m` doubles.
 */
enum ReplidynStatus replidyn_system_step(const struct ReplidynSystem *sys,
                                         const double *x,
                                         size_t m,
                                         double *out);

/**
 * Iterates `steps` steps from `x0` at `precision_bits` (53 or 64..=4096),
 * keeping every `thinning`-th state.
 *
 * # Safety
 * `x0` must point to `m` doubles and `out` be a valid pointer.
 */
enum ReplidynStatus replidyn_iterate(const struct ReplidynSystem *sys,
                                     const double *x0,
                                     size_t m,
                                     size_t steps,
                                     uint32_t precision_bits,
                                     size_t thinning,
                                     struct ReplidynOrbit **out);

/**
 * # Safety
 * `orbit` must come from [`replidyn_iterate`] or be null.
 */
void replidyn_orbit_free(struct ReplidynOrbit *orbit);

/**
 * Number of stored states, including the initial one.
 *
 * # Safety
 * `orbit` must be a live handle or null.
 */
size_t replidyn_orbit_len(const struct ReplidynOrbit *orbit);

/**
 * Copies stored state `index` (rounded to double) into `out[0..m]` and its
 * step number into `step` (if non-null).
 *
 * # Safety
 * `out` must point to `m` doubles.
 */
enum ReplidynStatus replidyn_orbit_state(const struct ReplidynOrbit *orbit,
                                         size_t index,
                                         double *out,
                                         size_t m,
                                         size_t *step);

/**
 * Largest pre-renormalization coordinate-sum drift over all steps.
 *
 * # Safety
 * `orbit` must be a live handle or null.
 */
double replidyn_orbit_max_drift(const struct ReplidynOrbit *orbit);

/**
 * Orbit CSV (`n,x1,...,xm,drift`). Free with [`replidyn_string_free`].
 *
 * # Safety
 * `orbit` must be a live handle or null.
 */
char *replidyn_orbit_csv(const struct ReplidynOrbit *orbit);

/**
 * Runs the folk-theorem certificate. Writes the report JSON to
 * `report_json` (free with [`replidyn_string_free`]) and returns
 * `CERTIFICATE_FAILED` when some clause fails.
 *
 * # Safety
 * `report_json` must be a valid pointer or null.
 */
enum ReplidynStatus replidyn_certify_folk(const struct ReplidynSystem *sys,
                                          size_t trials,
                                          uint64_t seed,
                                          size_t horizon,
                                          double tol,
                                          char **report_json);

/**
 * Counts similar-order violations of a fitness map over `samples` simplex
 * and `samples` ball points.
 *
 * # Safety
 * `fitness_json` must be a valid C string and `violations` a valid pointer.
 */
enum ReplidynStatus replidyn_verify_sop(const char *fitness_json,
                                        size_t samples,
                                        uint64_t seed,
                                        size_t *violations);

/**
 * Digamma function in double precision.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ReplidynStatus replidyn_digamma(double t, double *out);

/**
 * Runs a CLI subcommand (`simulate`, `verify-folk`, `verify-historic`)
 * on a config document, writing artifacts to `out_dir` (or the config's
 * directory when null). The status equals the CLI exit code.
 *
 * # Safety
 * `command` and `config_json` must be valid C strings; `out_dir` may be
 * null.
 */
enum ReplidynStatus replidyn_run(const char *command, const char *config_json, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REPLIDYN_H */
