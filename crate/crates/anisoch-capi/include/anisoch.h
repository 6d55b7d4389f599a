/* C interface to the anisoch anisotropic Cahn-Hilliard solver. */

#ifndef ANISOCH_H
#define ANISOCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible call.
typedef enum AchStatus {
  // Success.
  ACH_STATUS_OK = 0,
  // A required pointer argument was NULL.
  ACH_STATUS_NULL_POINTER = 1,
  // Malformed input (bad UTF-8, bad configuration, bad axis, ...).
  ACH_STATUS_INVALID_ARGUMENT = 2,
  // The solver reported an error; see `ach_last_error_message`.
  ACH_STATUS_RUNTIME = 3,
  // The caller's buffer is too small for the requested data.
  ACH_STATUS_BUFFER_TOO_SMALL = 4,
  // A filesystem operation failed.
  ACH_STATUS_IO = 5,
  // An internal invariant failed (a bug; please report it).
  ACH_STATUS_PANIC = 6,
} AchStatus;

// Opaque simulation handle. Create with `ach_sim_new_from_config`,
// destroy with `ach_sim_free`.
typedef struct AchSimulation AchSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ach_version(void);

// Message describing the most recent failure on this thread. Never NULL;
// the pointer is invalidated by the next failing call on the same thread.
const char *ach_last_error_message(void);

// Create a simulation from a TOML run configuration (see the crate README
// for the grammar). On success writes the new handle to `out`.
//
// # Safety
// `toml_text` must be a NUL-terminated string; `out` must be valid for one
// pointer write.
enum AchStatus ach_sim_new_from_config(const char *toml_text, struct AchSimulation **out);

// Advance the simulation by `n_steps` time steps.
//
// # Safety
// `sim` must be a live handle from `ach_sim_new_from_config`.
enum AchStatus ach_sim_step(struct AchSimulation *sim, uint64_t n_steps);

// Current simulation time.
//
// # Safety
// `sim` must be a live handle; `out` valid for one write.
enum AchStatus ach_sim_time(const struct AchSimulation *sim, double *out);

// Number of completed steps.
//
// # Safety
// `sim` must be a live handle; `out` valid for one write.
enum AchStatus ach_sim_step_count(const struct AchSimulation *sim, uint64_t *out);

// Original (physical) free energy of the current field.
//
// # Safety
// `sim` must be a live handle; `out` valid for one write.
enum AchStatus ach_sim_energy(const struct AchSimulation *sim, double *out);

// Conserved quantity `∫φ` of the current field.
//
// # Safety
// `sim` must be a live handle; `out` valid for one write.
enum AchStatus ach_sim_mass(const struct AchSimulation *sim, double *out);

// Number of grid nodes (the length `ach_sim_copy_field` requires).
//
// # Safety
// `sim` must be a live handle; `out` valid for one write.
enum AchStatus ach_sim_field_len(const struct AchSimulation *sim, size_t *out);

// Spatial dimension (2 or 3).
//
// # Safety
// `sim` must be a live handle; `out` valid for one write.
enum AchStatus ach_sim_grid_dim(const struct AchSimulation *sim, size_t *out);

// Grid points along `axis` (0-based).
//
// # Safety
// `sim` must be a live handle; `out` valid for one write.
enum AchStatus ach_sim_grid_points(const struct AchSimulation *sim, size_t axis, size_t *out);

// Copy the current field (row-major node order) into `buffer`.
// `len` must equal the value reported by `ach_sim_field_len`.
//
// # Safety
// `sim` must be a live handle; `buffer` must be valid for `len` writes.
enum AchStatus ach_sim_copy_field(const struct AchSimulation *sim, double *buffer, size_t len);

// Write the current field to `path` in the solver's snapshot format
// (`SAVFLD01`; readable by the library and by `read_snapshot`).
//
// # Safety
// `sim` must be a live handle; `path` must be a NUL-terminated string.
enum AchStatus ach_sim_write_snapshot(const struct AchSimulation *sim, const char *path);

// Destroy a handle. NULL is accepted and ignored.
//
// # Safety
// `sim` must be NULL or a live handle; it must not be used afterwards.
void ach_sim_free(struct AchSimulation *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ANISOCH_H */
