#ifndef FIELDPROBE_H
#define FIELDPROBE_H

/* Generated by cbindgen from fieldprobe-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible call.
 */
typedef enum {
  FP_STATUS_OK = 0,
  FP_STATUS_NULL_POINTER = 1,
  FP_STATUS_INVALID_ARGUMENT = 2,
  FP_STATUS_PRECONDITION_VIOLATED = 3,
  FP_STATUS_TOLERANCE_FAILED = 4,
  FP_STATUS_IO = 5,
} FpStatus;

/**
 * Opaque complex grid function handle.
 */
typedef struct FpGrid FpGrid;

/**
 * Opaque lattice handle.
 */
typedef struct FpLattice FpLattice;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version string; static storage, do not free.
 */
const char *fp_version(void);

/**
 * Message of the most recent error on this thread; static storage owned
 * by the library, valid until the next failing call.
 */
const char *fp_last_error_message(void);

/**
 * Creates a lattice. `n_t`, `n_x` are the grid extents, `dt`, `dx` the
 * spacings; dt/dx must not exceed one.
 *
 * # Safety
 * `out` must point to writable storage for one pointer.
 */
FpStatus fp_lattice_new(uintptr_t n_t, uintptr_t n_x, double dt, double dx, FpLattice **out);

/**
 * Releases a lattice handle.
 *
 * # Safety
 * `lattice` must be a pointer returned by `fp_lattice_new`, or null.
 */
void fp_lattice_free(FpLattice *lattice);

/**
 * Creates a zero grid function on the lattice.
 *
 * # Safety
 * `lattice` must be valid; `out` must point to writable storage.
 */
FpStatus fp_grid_new(const FpLattice *lattice, FpGrid **out);

/**
 * Releases a grid handle.
 *
 * # Safety
 * `grid` must be a pointer returned by this library, or null.
 */
void fp_grid_free(FpGrid *grid);

/**
 * Sets one cell value.
 *
 * # Safety
 * `grid` must be valid and not shared across threads during the call.
 */
FpStatus fp_grid_set(FpGrid *grid, uintptr_t t, uintptr_t x, double re, double im);

/**
 * Reads one cell value into `re`, `im`.
 *
 * # Safety
 * All pointers must be valid.
 */
FpStatus fp_grid_get(const FpGrid *grid, uintptr_t t, uintptr_t x, double *re, double *im);

/**
 * True (1) when the cell (t, x) lies in the discrete causal future
 * (`future != 0`) or past of the source cell.
 *
 * # Safety
 * `lattice` and `out` must be valid.
 */
FpStatus fp_cone_contains(const FpLattice *lattice,
                          uintptr_t source_t,
                          uintptr_t source_x,
                          int32_t future,
                          uintptr_t t,
                          uintptr_t x,
                          int32_t *out);

/**
 * Computes the scattered pair (f_minus, h_minus) of a probe smearing
 * `h` for the two-field model with the given masses, coupling profile
 * `rho` scaled by `lambda`. The outputs are freshly allocated grids.
 *
 * # Safety
 * `lattice`, `rho`, `h` must be valid handles on the same lattice;
 * `out_f_minus` and `out_h_minus` must point to writable storage.
 */
FpStatus fp_scattered_pair(const FpLattice *lattice,
                           double system_mass,
                           double probe_mass,
                           const FpGrid *rho,
                           double lambda,
                           const FpGrid *h,
                           FpGrid **out_f_minus,
                           FpGrid **out_h_minus);

/**
 * Evaluates the variance decomposition of the measurement of `h` in the
 * vacuum preparation: total, system and probe contributions.
 *
 * # Safety
 * Handles must be valid; output pointers must be writable.
 */
FpStatus fp_variance_report(const FpLattice *lattice,
                            double system_mass,
                            double probe_mass,
                            const FpGrid *rho,
                            double lambda,
                            const FpGrid *h,
                            double *out_total,
                            double *out_system,
                            double *out_probe);

/**
 * Runs every experiment of a TOML scenario, writing report and data
 * files into `out_dir`, and returns the combined report array as a
 * JSON string through `out_json` (release with `fp_string_free`).
 * Returns `FP_STATUS_TOLERANCE_FAILED` when all experiments ran but at
 * least one failed its tolerance.
 *
 * # Safety
 * `config_toml` and `out_dir` must be NUL-terminated strings; `out_json`
 * must point to writable storage.
 */
FpStatus fp_run_scenario(const char *config_toml, const char *out_dir, char **out_json);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must originate from this library, or be null.
 */
void fp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FIELDPROBE_H */
