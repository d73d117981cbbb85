//! C ABI over `vortex-core`.
//!
//! Every fallible call returns a [`VxStatus`]; on failure the message is
//! kept per thread and read back with [`vx_last_error`]. Objects are opaque
//! handles created by `vx_*_new` style functions and released with the
//! matching `vx_*_free`. Points travel as packed `x, y, z` triples.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;
use std::sync::Arc;

use vortex_core::blobs::BlobSystem;
use vortex_core::filament::{Filament, RateOptions};
use vortex_core::kernel::{verify_admissibility, SamplingSpec};
use vortex_core::loops::{make_bump_kernel, Generator, LatticeKernel, LoopSystem};
use vortex_core::refine::{refine, RefineMode, RefinePolicy};
use vortex_core::sim::{step, Scheme, State};
use vortex_core::{Kernel, Vec3, VortexError};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    NonConvergent = 3,
    QuadratureOrderTooLow = 4,
    NonFiniteState = 5,
    MaxPointsExceeded = 6,
    CutoffTooSmall = 7,
    EnergyCeilingExceeded = 8,
    BufferTooSmall = 9,
    WrongModel = 10,
    Io = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VxScheme {
    Euler = 0,
    Rk4 = 1,
    /// Loops only.
    ImplicitMidpoint = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VxModel {
    Filament = 0,
    Blobs = 1,
    Loops = 2,
}

/// Whole-space regularized kernel.
pub struct VxKernel(Kernel);

/// Periodic lattice kernel for loops.
pub struct VxLattice(Arc<LatticeKernel>);

/// A filament, blob system or loop system.
pub struct VxState(State);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

struct Fail(VxStatus, String);

impl From<VortexError> for Fail {
    fn from(e: VortexError) -> Self {
        let status = match e {
            VortexError::InvalidParameter { .. } | VortexError::Malformed { .. } => VxStatus::InvalidParameter,
            VortexError::NonConvergent { .. } => VxStatus::NonConvergent,
            VortexError::QuadratureOrderTooLow { .. } => VxStatus::QuadratureOrderTooLow,
            VortexError::NonFiniteState { .. } => VxStatus::NonFiniteState,
            VortexError::MaxPointsExceeded { .. } => VxStatus::MaxPointsExceeded,
            VortexError::CutoffTooSmall { .. } => VxStatus::CutoffTooSmall,
            VortexError::EnergyCeilingExceeded { .. } => VxStatus::EnergyCeilingExceeded,
            VortexError::Io { .. } => VxStatus::Io,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(VxStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> VxStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(Fail(VxStatus::Panic, format!("panic: {msg}")))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            VxStatus::Ok
        }
        Err(Fail(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg);
            status
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn get_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    unsafe { p.as_mut() }.ok_or_else(|| null(what))
}

unsafe fn read_points(p: *const f64, n: usize, what: &str) -> Result<Vec<Vec3>, Fail> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(null(what));
    }
    let flat = unsafe { slice::from_raw_parts(p, 3 * n) };
    Ok(flat.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect())
}

unsafe fn write_points(points: &[Vec3], out: *mut f64, capacity: usize) -> Result<(), Fail> {
    if capacity < points.len() {
        return Err(Fail(
            VxStatus::BufferTooSmall,
            format!("buffer holds {capacity} points, need {}", points.len()),
        ));
    }
    if points.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("out"));
    }
    let flat = unsafe { slice::from_raw_parts_mut(out, 3 * points.len()) };
    for (c, p) in flat.chunks_exact_mut(3).zip(points) {
        c.copy_from_slice(p.as_slice());
    }
    Ok(())
}

unsafe fn write_values(values: &[f64], out: *mut f64, capacity: usize) -> Result<(), Fail> {
    if capacity < values.len() {
        return Err(Fail(
            VxStatus::BufferTooSmall,
            format!("buffer holds {capacity} values, need {}", values.len()),
        ));
    }
    if values.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("out"));
    }
    unsafe { slice::from_raw_parts_mut(out, values.len()) }.copy_from_slice(values);
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    let slot = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn set<T>(out: *mut T, value: T) -> Result<(), Fail> {
    let slot = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
    *slot = value;
    Ok(())
}

fn filament(state: &VxState) -> Result<&Filament, Fail> {
    match &state.0 {
        State::Filament(f) => Ok(f),
        other => Err(Fail(
            VxStatus::WrongModel,
            format!("expected a filament, got {}", other.model()),
        )),
    }
}

/// Copies the calling thread's last error message into `buf` as a
/// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
/// message length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn vx_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            unsafe {
                ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Rosenhead kernel `Γ/(4π) (|x|² + μ²)^{-1/2}`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn vx_kernel_rosenhead(gamma: f64, mu: f64, out: *mut *mut VxKernel) -> VxStatus {
    guard(|| unsafe { put(out, VxKernel(Kernel::rosenhead(gamma, mu)?)) })
}

/// Gaussian kernel `Γ exp(−|x|²/2σ²)`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn vx_kernel_gaussian(gamma: f64, sigma: f64, out: *mut *mut VxKernel) -> VxStatus {
    guard(|| unsafe { put(out, VxKernel(Kernel::gaussian(gamma, sigma)?)) })
}

/// # Safety
/// `kernel` must be null or a handle from a `vx_kernel_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn vx_kernel_free(kernel: *mut VxKernel) {
    if !kernel.is_null() {
        drop(unsafe { Box::from_raw(kernel) });
    }
}

/// `φ(x)` for a point `x[3]`.
///
/// # Safety
/// `x` must point to three doubles and `out` to one.
#[no_mangle]
pub unsafe extern "C" fn vx_kernel_value(kernel: *const VxKernel, x: *const f64, out: *mut f64) -> VxStatus {
    guard(|| unsafe {
        let k = get(kernel, "kernel")?;
        let p = read_points(x, 1, "x")?;
        set(out, k.0.value(&p[0]))
    })
}

/// Runs the admissibility check with default sampling; `*passed` is 1 when
/// every condition holds.
///
/// # Safety
/// `passed` must point to a writable int.
#[no_mangle]
pub unsafe extern "C" fn vx_kernel_verify(kernel: *const VxKernel, passed: *mut i32) -> VxStatus {
    guard(|| unsafe {
        let k = get(kernel, "kernel")?;
        let report = verify_admissibility(&k.0, &SamplingSpec::default());
        set(passed, report.all_passed() as i32)
    })
}

/// Lattice kernel `ρ̂(k) = exp(−w²|k|²/2)` on `|k|_∞ ≤ cutoff`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn vx_lattice_gaussian(
    width: f64,
    cutoff: i32,
    allowed_tail: f64,
    out: *mut *mut VxLattice,
) -> VxStatus {
    guard(|| unsafe {
        let k = make_bump_kernel(&Generator::Gaussian { width }, cutoff, allowed_tail)?;
        put(out, VxLattice(Arc::new(k)))
    })
}

/// # Safety
/// `lattice` must be null or a handle from `vx_lattice_gaussian`.
#[no_mangle]
pub unsafe extern "C" fn vx_lattice_free(lattice: *mut VxLattice) {
    if !lattice.is_null() {
        drop(unsafe { Box::from_raw(lattice) });
    }
}

/// Closed filament through `n` nodes.
///
/// # Safety
/// `nodes` must point to `3 n` doubles; `out` to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn vx_filament_new(
    kernel: *const VxKernel,
    nodes: *const f64,
    n: usize,
    out: *mut *mut VxState,
) -> VxStatus {
    guard(|| unsafe {
        let k = get(kernel, "kernel")?;
        let f = Filament::new(read_points(nodes, n, "nodes")?, k.0.clone())?;
        put(out, VxState(State::Filament(f)))
    })
}

/// `n` blobs with positions and vector strengths.
///
/// # Safety
/// `positions` and `vectors` must each point to `3 n` doubles.
#[no_mangle]
pub unsafe extern "C" fn vx_blobs_new(
    kernel: *const VxKernel,
    positions: *const f64,
    vectors: *const f64,
    n: usize,
    out: *mut *mut VxState,
) -> VxStatus {
    guard(|| unsafe {
        let k = get(kernel, "kernel")?;
        let b = BlobSystem::new(
            read_points(positions, n, "positions")?,
            read_points(vectors, n, "vectors")?,
            k.0.clone(),
        )?;
        put(out, VxState(State::Blobs(b)))
    })
}

/// `n` vortex loops in the periodic box `[−π, π)³`.
///
/// # Safety
/// `positions` and `moments` must each point to `3 n` doubles.
#[no_mangle]
pub unsafe extern "C" fn vx_loops_new(
    lattice: *const VxLattice,
    positions: *const f64,
    moments: *const f64,
    n: usize,
    out: *mut *mut VxState,
) -> VxStatus {
    guard(|| unsafe {
        let k = get(lattice, "lattice")?;
        let s = LoopSystem::new(
            read_points(positions, n, "positions")?,
            read_points(moments, n, "moments")?,
            k.0.clone(),
        )?;
        put(out, VxState(State::Loops(s)))
    })
}

/// # Safety
/// `state` must be null or a handle from a state constructor.
#[no_mangle]
pub unsafe extern "C" fn vx_state_free(state: *mut VxState) {
    if !state.is_null() {
        drop(unsafe { Box::from_raw(state) });
    }
}

/// # Safety
/// `model` and `n` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vx_state_info(state: *const VxState, model: *mut VxModel, n: *mut usize) -> VxStatus {
    guard(|| unsafe {
        let s = get(state, "state")?;
        let m = match s.0 {
            State::Filament(_) => VxModel::Filament,
            State::Blobs(_) => VxModel::Blobs,
            State::Loops(_) => VxModel::Loops,
        };
        set(model, m)?;
        set(n, s.0.len())
    })
}

/// Copies the `N` positions into `out`, which holds `capacity` points.
///
/// # Safety
/// `out` must point to `3 capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn vx_state_positions(state: *const VxState, out: *mut f64, capacity: usize) -> VxStatus {
    guard(|| unsafe { write_points(get(state, "state")?.0.positions(), out, capacity) })
}

/// Copies blob vectors or loop moments; fails with `WrongModel` for a
/// filament.
///
/// # Safety
/// `out` must point to `3 capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn vx_state_vectors(state: *const VxState, out: *mut f64, capacity: usize) -> VxStatus {
    guard(|| unsafe {
        let s = get(state, "state")?;
        let v = s
            .0
            .vectors()
            .ok_or_else(|| Fail(VxStatus::WrongModel, "a filament has no separate vectors".into()))?;
        write_points(v, out, capacity)
    })
}

/// Time derivative of the state: `N` position rates, followed for blobs and
/// loops by `N` vector rates.
///
/// # Safety
/// `out` must point to `3 capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn vx_state_rhs(state: *const VxState, out: *mut f64, capacity: usize) -> VxStatus {
    guard(|| unsafe { write_points(&get(state, "state")?.0.rhs(), out, capacity) })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vx_state_energy(state: *const VxState, out: *mut f64) -> VxStatus {
    guard(|| unsafe { set(out, get(state, "state")?.0.energy()) })
}

/// Analytic `dH/dt` with default quadrature settings.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vx_state_energy_rate(state: *const VxState, out: *mut f64) -> VxStatus {
    guard(|| unsafe { set(out, get(state, "state")?.0.energy_rate(&RateOptions::default())?) })
}

/// Advances the state in place by one step of size `dt` from time `t`.
/// The state is left untouched on failure.
///
/// # Safety
/// `state` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn vx_state_step(state: *mut VxState, scheme: VxScheme, dt: f64, t: f64) -> VxStatus {
    guard(|| unsafe {
        let s = get_mut(state, "state")?;
        let scheme = match scheme {
            VxScheme::Euler => Scheme::Euler,
            VxScheme::Rk4 => Scheme::Rk4,
            VxScheme::ImplicitMidpoint => Scheme::ImplicitMidpoint,
        };
        s.0 = step(&s.0, scheme, dt, t)?;
        Ok(())
    })
}

/// Per-segment instability scores of a filament, `N` values.
///
/// # Safety
/// `out` must point to `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn vx_filament_scores(state: *const VxState, out: *mut f64, capacity: usize) -> VxStatus {
    guard(|| unsafe {
        let f = filament(get(state, "state")?)?;
        let rate = f.energy_rate(&RateOptions::default())?;
        write_values(&rate.scores, out, capacity)
    })
}

/// Applies the refinement policy to a filament in place. `local_fraction`
/// of zero selects uniform passes; otherwise that fraction of segments is
/// split per local pass.
///
/// # Safety
/// `state` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn vx_filament_refine(
    state: *mut VxState,
    a_max: f64,
    a_target: f64,
    local_fraction: f64,
    max_points: usize,
) -> VxStatus {
    guard(|| unsafe {
        let s = get_mut(state, "state")?;
        let f = filament(s)?;
        let policy = RefinePolicy {
            a_max,
            a_target,
            mode: if local_fraction == 0.0 { RefineMode::Uniform } else { RefineMode::Local },
            local_fraction: if local_fraction == 0.0 { 1.0 } else { local_fraction },
            max_points,
        };
        let (g, _) = refine(f, &policy, &RateOptions::default())?;
        s.0 = State::Filament(g);
        Ok(())
    })
}
