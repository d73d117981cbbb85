#ifndef VORTEX_H
#define VORTEX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum {
  VX_STATUS_OK = 0,
  VX_STATUS_NULL_POINTER = 1,
  VX_STATUS_INVALID_PARAMETER = 2,
  VX_STATUS_NON_CONVERGENT = 3,
  VX_STATUS_QUADRATURE_ORDER_TOO_LOW = 4,
  VX_STATUS_NON_FINITE_STATE = 5,
  VX_STATUS_MAX_POINTS_EXCEEDED = 6,
  VX_STATUS_CUTOFF_TOO_SMALL = 7,
  VX_STATUS_ENERGY_CEILING_EXCEEDED = 8,
  VX_STATUS_BUFFER_TOO_SMALL = 9,
  VX_STATUS_WRONG_MODEL = 10,
  VX_STATUS_IO = 11,
  VX_STATUS_PANIC = 12,
} VxStatus;

typedef enum {
  VX_MODEL_FILAMENT = 0,
  VX_MODEL_BLOBS = 1,
  VX_MODEL_LOOPS = 2,
} VxModel;

typedef enum {
  VX_SCHEME_EULER = 0,
  VX_SCHEME_RK4 = 1,
  /*
   Loops only.
   */
  VX_SCHEME_IMPLICIT_MIDPOINT = 2,
} VxScheme;

/*
 Whole-space regularized kernel.
 */
typedef struct VxKernel VxKernel;

/*
 Periodic lattice kernel for loops.
 */
typedef struct VxLattice VxLattice;

/*
 A filament, blob system or loop system.
 */
typedef struct VxState VxState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the calling thread's last error message into `buf` as a
 NUL-terminated string, truncating to `len - 1` bytes. Returns the full
 message length in bytes, excluding the terminator.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
size_t vx_last_error(char *buf, size_t len);

/*
 Rosenhead kernel `Γ/(4π) (|x|² + μ²)^{-1/2}`.

 # Safety
 `out` must be a valid pointer to a handle slot.
 */
VxStatus vx_kernel_rosenhead(double gamma, double mu, VxKernel **out);

/*
 Gaussian kernel `Γ exp(−|x|²/2σ²)`.

 # Safety
 `out` must be a valid pointer to a handle slot.
 */
VxStatus vx_kernel_gaussian(double gamma, double sigma, VxKernel **out);

/*
 # Safety
 `kernel` must be null or a handle from a `vx_kernel_*` constructor.
 */
void vx_kernel_free(VxKernel *kernel);

/*
 `φ(x)` for a point `x[3]`.

 # Safety
 `x` must point to three doubles and `out` to one.
 */
VxStatus vx_kernel_value(const VxKernel *kernel, const double *x, double *out);

/*
 Runs the admissibility check with default sampling; `*passed` is 1 when
 every condition holds.

 # Safety
 `passed` must point to a writable int.
 */
VxStatus vx_kernel_verify(const VxKernel *kernel, int32_t *passed);

/*
 Lattice kernel `ρ̂(k) = exp(−w²|k|²/2)` on `|k|_∞ ≤ cutoff`.

 # Safety
 `out` must be a valid pointer to a handle slot.
 */
VxStatus vx_lattice_gaussian(double width, int32_t cutoff, double allowed_tail, VxLattice **out);

/*
 # Safety
 `lattice` must be null or a handle from `vx_lattice_gaussian`.
 */
void vx_lattice_free(VxLattice *lattice);

/*
 Closed filament through `n` nodes.

 # Safety
 `nodes` must point to `3 n` doubles; `out` to a handle slot.
 */
VxStatus vx_filament_new(const VxKernel *kernel, const double *nodes, size_t n, VxState **out);

/*
 `n` blobs with positions and vector strengths.

 # Safety
 `positions` and `vectors` must each point to `3 n` doubles.
 */
VxStatus vx_blobs_new(const VxKernel *kernel,
                      const double *positions,
                      const double *vectors,
                      size_t n,
                      VxState **out);

/*
 `n` vortex loops in the periodic box `[−π, π)³`.

 # Safety
 `positions` and `moments` must each point to `3 n` doubles.
 */
VxStatus vx_loops_new(const VxLattice *lattice,
                      const double *positions,
                      const double *moments,
                      size_t n,
                      VxState **out);

/*
 # Safety
 `state` must be null or a handle from a state constructor.
 */
void vx_state_free(VxState *state);

/*
 # Safety
 `model` and `n` must be writable.
 */
VxStatus vx_state_info(const VxState *state, VxModel *model, size_t *n);

/*
 Copies the `N` positions into `out`, which holds `capacity` points.

 # Safety
 `out` must point to `3 capacity` doubles.
 */
VxStatus vx_state_positions(const VxState *state, double *out, size_t capacity);

/*
 Copies blob vectors or loop moments; fails with `WrongModel` for a
 filament.

 # Safety
 `out` must point to `3 capacity` doubles.
 */
VxStatus vx_state_vectors(const VxState *state, double *out, size_t capacity);

/*
 Time derivative of the state: `N` position rates, followed for blobs and
 loops by `N` vector rates.

 # Safety
 `out` must point to `3 capacity` doubles.
 */
VxStatus vx_state_rhs(const VxState *state, double *out, size_t capacity);

/*
 # Safety
 `out` must be writable.
 */
VxStatus vx_state_energy(const VxState *state, double *out);

/*
 Analytic `dH/dt` with default quadrature settings.

 # Safety
 `out` must be writable.
 */
VxStatus vx_state_energy_rate(const VxState *state, double *out);

/*
 Advances the state in place by one step of size `dt` from time `t`.
 The state is left untouched on failure.

 # Safety
 `state` must be a valid handle.
 */
VxStatus vx_state_step(VxState *state, VxScheme scheme, double dt, double t);

/*
 Per-segment instability scores of a filament, `N` values.

 # Safety
 `out` must point to `capacity` doubles.
 */
VxStatus vx_filament_scores(const VxState *state, double *out, size_t capacity);

/*
 Applies the refinement policy to a filament in place. `local_fraction`
 of zero selects uniform passes; otherwise that fraction of segments is
 split per local pass.

 # Safety
 `state` must be a valid handle.
 */
VxStatus vx_filament_refine(VxState *state,
                            double a_max,
                            double a_target,
                            double local_fraction,
                            size_t max_points);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VORTEX_H */
