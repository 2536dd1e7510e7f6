#ifndef OHPHASE_H
#define OHPHASE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum OhpStatus {
  OHP_STATUS_OK = 0,
  OHP_STATUS_NULL_POINTER = 1,
  OHP_STATUS_INVALID_PARAMETER = 2,
  OHP_STATUS_NON_CANCELLATION = 3,
  OHP_STATUS_NOT_HERMITIAN = 4,
  OHP_STATUS_CONVERGENCE_FAILURE = 5,
  OHP_STATUS_AMBIGUOUS_LABEL = 6,
  OHP_STATUS_TRACKING_BREAKDOWN = 7,
  OHP_STATUS_LABEL_MISMATCH = 8,
  OHP_STATUS_NOT_PURE_MAGNETIC = 9,
  OHP_STATUS_NOT_PURE_ELECTRIC = 10,
  OHP_STATUS_NO_CRITICAL_RATE = 11,
  OHP_STATUS_REGIME_UNDEFINED = 12,
  OHP_STATUS_DEGENERATE_BARE_SPECTRUM = 13,
  OHP_STATUS_STEP_COUNT_TOO_SMALL = 14,
  OHP_STATUS_INDEX_OUT_OF_RANGE = 15,
  OHP_STATUS_PANIC = 16,
} OhpStatus;

/**
 * Molecule constants plus a field protocol.
 */
typedef struct OhpModel OhpModel;

/**
 * Phases along a tracked rotation-rate sweep.
 */
typedef struct OhpSweep OhpSweep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL terminated,
 * truncated to `len`). Returns the full message length without the NUL, or
 * 0 when there is no message.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t ohp_last_error_message(char *buf, size_t len);

/**
 * New model with the built-in OH constants and no fields.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum OhpStatus ohp_model_new_oh(struct OhpModel **out);

/**
 * New model with explicit constants: `delta` in rad/s, `mu_e` in C·m,
 * `mu_b` in J/T, `hbar` in J·s.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum OhpStatus ohp_model_new(double delta,
                             double mu_e,
                             double mu_b,
                             double hbar,
                             struct OhpModel **out);

/**
 * Sets the co-rotating fields: `b_tesla`, `e_kv_per_cm`, cone angles in
 * radians.
 *
 * # Safety
 * `model` must be a live handle from `ohp_model_new*`.
 */
enum OhpStatus ohp_model_set_fields(struct OhpModel *model,
                                    double b_tesla,
                                    double theta_m,
                                    double e_kv_per_cm,
                                    double theta_e);

/**
 * # Safety
 * `model` must be null or a live handle; it is invalid afterwards.
 */
void ohp_model_free(struct OhpModel *model);

/**
 * Dressed energies (J) at `omega_r`, by state index.
 *
 * # Safety
 * `model` must be a live handle and `out` must hold 8 doubles.
 */
enum OhpStatus ohp_dressed_energies(const struct OhpModel *model, double omega_r, double *out);

/**
 * Geometric phases (rad) at `omega_r`, by state index.
 *
 * # Safety
 * `model` must be a live handle and `out` must hold 8 doubles.
 */
enum OhpStatus ohp_geometric_phases(const struct OhpModel *model, double omega_r, double *out);

/**
 * `2ω_L cosθ_m` for a pure magnetic model.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum OhpStatus ohp_critical_rate(const struct OhpModel *model, double *out);

/**
 * `M` times two and parity (0 for e, 1 for f) of a state index.
 *
 * # Safety
 * Both output pointers must be valid.
 */
enum OhpStatus ohp_state_label(size_t index, int8_t *m_times_2, uint8_t *parity);

/**
 * Tracks a sweep over `len` ascending rotation rates.
 *
 * # Safety
 * `model` must be a live handle, `grid` must point to `len` doubles and
 * `out` must be a valid pointer to a handle slot.
 */
enum OhpStatus ohp_sweep_new(const struct OhpModel *model,
                             const double *grid,
                             size_t len,
                             struct OhpSweep **out);

/**
 * Number of grid points in the sweep, 0 for a null handle.
 *
 * # Safety
 * `sweep` must be null or a live handle.
 */
size_t ohp_sweep_len(const struct OhpSweep *sweep);

/**
 * Geometric phases at grid point `k`, by state index.
 *
 * # Safety
 * `sweep` must be a live handle and `out` must hold 8 doubles.
 */
enum OhpStatus ohp_sweep_phases(const struct OhpSweep *sweep, size_t k, double *out);

/**
 * # Safety
 * `sweep` must be null or a live handle; it is invalid afterwards.
 */
void ohp_sweep_free(struct OhpSweep *sweep);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OHPHASE_H */
