#ifndef SSH_JUMPTIME_H
#define SSH_JUMPTIME_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SjtStatus {
  SJT_STATUS_OK = 0,
  SJT_STATUS_IO = 1,
  SJT_STATUS_USAGE = 2,
  SJT_STATUS_NUMERICAL = 3,
  SJT_STATUS_SINGULAR = 4,
  SJT_STATUS_NULL_POINTER = 5,
  SJT_STATUS_PANIC = 6,
} SjtStatus;

/**
 * Opaque ancilla-extended model.
 */
typedef struct SjtExtendedModel SjtExtendedModel;

/**
 * Opaque result of a phase sweep.
 */
typedef struct SjtSweepResult SjtSweepResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to at least `len` writable bytes.
 */
size_t sjt_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sjt_version(void);

/**
 * Closed-form jump-time propagator `K(p, p')`.
 *
 * # Safety
 * `re` and `im` must be valid for writes.
 */
enum SjtStatus sjt_kcc_closed_form(double v,
                                   double w,
                                   double gamma,
                                   double p,
                                   double p_prime,
                                   double *re,
                                   double *im);

/**
 * Winding number of the Bloch vector on an `n_grid`-point loop.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SjtStatus sjt_winding_number(double v, double w, size_t n_grid, int64_t *out);

/**
 * Build the extended model for `(p, p')` with a 2- or 3-level ancilla.
 *
 * # Safety
 * `out` must be valid for writes. The handle written there must be released
 * with [`sjt_extended_free`].
 */
enum SjtStatus sjt_extended_new(double v,
                                double w,
                                double gamma,
                                double p,
                                double p_prime,
                                size_t ancilla_dim,
                                struct SjtExtendedModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`sjt_extended_new`] not yet freed.
 */
void sjt_extended_free(struct SjtExtendedModel *model);

/**
 * Hilbert-space dimension of the extended model (0 for a null handle).
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t sjt_extended_dim(const struct SjtExtendedModel *model);

/**
 * Emulated propagator on the grid `k Δt`, `Δt = t_final / n_final`.
 *
 * # Safety
 * `model` must be a live handle; `re` and `im` must be valid for writes.
 */
enum SjtStatus sjt_extended_kcc(const struct SjtExtendedModel *model,
                                double t_final,
                                size_t n_final,
                                double *re,
                                double *im);

/**
 * Unnormalized first- and second-jump states (4×4, branch ⊗ sublattice)
 * from the ancilla blocks. Each output receives 32 doubles: row-major
 * entries as interleaved (re, im) pairs.
 *
 * # Safety
 * `model` must be a live handle; `rho1` and `rho2` must each point to 32
 * writable doubles.
 */
enum SjtStatus sjt_extended_jump_states(const struct SjtExtendedModel *model,
                                        double t_final,
                                        size_t n_final,
                                        double *rho1,
                                        double *rho2);

/**
 * Run a phase sweep configured by TOML text (keys as in the CLI config
 * file; an empty string uses the defaults).
 *
 * # Safety
 * `config_toml` must be a NUL-terminated UTF-8 string; `out` must be valid
 * for writes. The result must be released with [`sjt_sweep_free`].
 */
enum SjtStatus sjt_sweep_run(const char *config_toml, struct SjtSweepResult **out);

/**
 * Number of rows (0 for a null handle).
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t sjt_sweep_len(const struct SjtSweepResult *result);

/**
 * Row `index` as `(w, Re T, Im T)`.
 *
 * # Safety
 * `result` must be a live handle; the out pointers must be valid for writes.
 */
enum SjtStatus sjt_sweep_row(const struct SjtSweepResult *result,
                             size_t index,
                             double *w,
                             double *t_re,
                             double *t_im);

/**
 * # Safety
 * `result` must be null or a handle from [`sjt_sweep_run`] not yet freed.
 */
void sjt_sweep_free(struct SjtSweepResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSH_JUMPTIME_H */
