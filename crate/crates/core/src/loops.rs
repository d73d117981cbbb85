//! Periodic vortex loops in the box `[−π, π)³`.
//!
//! Each loop carries a position `x_α` and a magnetization `m_α`. With a
//! truncated lattice kernel `ρ̂(k)`, `k ∈ Z³ \ {0}`, `|k|_∞ ≤ K`,
//!
//! ```text
//! u(x) = (2π)^{-3} Σ_k ρ̂(k) Π_k Σ_β m_β cos⟨k, x − x_β⟩
//! H    = ½ (2π)^{-3} Σ_k ρ̂(k) |Π_k Σ_β m_β e^{i⟨k, x_β⟩}|²
//! ```
//!
//! where `Π_k = I − k kᵀ/|k|²`. The `k = 0` mode is dropped. Loops move by
//! `ẋ_α = u(x_α)` and `ṁ_α = −(∇u(x_α))ᵀ m_α`, which is Hamilton's system
//! for `H` with `(x_α, m_α)` conjugate.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VortexError};
use crate::kernel::{ConditionResult, AdmissibilityReport, Mat3, Tensor3, Vec3};
use crate::sum::{Accumulator, Summation};

/// Generator `b̂` of a bump kernel `ρ̂ = b̂²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    /// `b̂(k) = exp(−w²|k|²/4)`, so `ρ̂(k) = exp(−w²|k|²/2)`.
    Gaussian { width: f64 },
}

impl Generator {
    pub fn eval(&self, k: &Vec3) -> f64 {
        match *self {
            Generator::Gaussian { width } => (-0.25 * width * width * k.norm_squared()).exp(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Generator::Gaussian { width } if !(width.is_finite() && width > 0.0) => Err(
                VortexError::invalid("width", format!("must be finite and > 0, got {width}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Mode {
    k: [i32; 3],
    kv: Vec3,
    /// `ρ̂(k)`
    rho: f64,
    proj: Mat3,
}

/// Non-negative even coefficients `ρ̂(k)` on `0 < |k|_∞ ≤ K`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeKernel {
    cutoff: i32,
    grid: Vec<f64>,
    /// One representative of each `±k` pair.
    half: Vec<Mode>,
    description: String,
}

fn grid_index(k: [i32; 3], cutoff: i32) -> usize {
    let w = (2 * cutoff + 1) as usize;
    let [a, b, c] = k.map(|v| (v + cutoff) as usize);
    (a * w + b) * w + c
}

fn is_positive_half(k: [i32; 3]) -> bool {
    k[0] > 0 || (k[0] == 0 && (k[1] > 0 || (k[1] == 0 && k[2] > 0)))
}

fn lattice(cutoff: i32) -> impl Iterator<Item = [i32; 3]> {
    (-cutoff..=cutoff).flat_map(move |a| {
        (-cutoff..=cutoff).flat_map(move |b| (-cutoff..=cutoff).map(move |c| [a, b, c]))
    })
}

fn kvec(k: [i32; 3]) -> Vec3 {
    Vec3::new(k[0] as f64, k[1] as f64, k[2] as f64)
}

impl LatticeKernel {
    /// Tabulates `rho(k)` for `0 < |k|_∞ ≤ cutoff`; rejects negative,
    /// non-finite or non-even coefficients.
    pub fn from_fn<F: Fn([i32; 3]) -> f64>(cutoff: i32, rho: F) -> Result<Self> {
        if cutoff < 1 {
            return Err(VortexError::invalid("cutoff", format!("must be >= 1, got {cutoff}")));
        }
        let w = (2 * cutoff + 1) as usize;
        let mut grid = vec![0.0; w * w * w];
        for k in lattice(cutoff) {
            if k == [0, 0, 0] {
                continue;
            }
            let v = rho(k);
            if !(v.is_finite() && v >= 0.0) {
                return Err(VortexError::invalid(
                    "rho",
                    format!("coefficient at {k:?} must be finite and >= 0, got {v}"),
                ));
            }
            grid[grid_index(k, cutoff)] = v;
        }
        let mut half = Vec::new();
        for k in lattice(cutoff) {
            if !is_positive_half(k) {
                continue;
            }
            let rho = grid[grid_index(k, cutoff)];
            let mirror = grid[grid_index(k.map(|v| -v), cutoff)];
            if rho != mirror {
                return Err(VortexError::invalid(
                    "rho",
                    format!("not even: rho({k:?}) = {rho} but rho(-k) = {mirror}"),
                ));
            }
            if rho == 0.0 {
                continue;
            }
            let kv = kvec(k);
            let proj = Mat3::identity() - kv * kv.transpose() / kv.norm_squared();
            half.push(Mode { k, kv, rho, proj });
        }
        Ok(LatticeKernel {
            cutoff,
            grid,
            half,
            description: format!("lattice K={cutoff}"),
        })
    }

    pub fn cutoff(&self) -> i32 {
        self.cutoff
    }

    pub fn describe(&self) -> &str {
        &self.description
    }

    /// `ρ̂(k)`; zero outside the retained set and at `k = 0`.
    pub fn coefficient(&self, k: [i32; 3]) -> f64 {
        if k.iter().any(|v| v.abs() > self.cutoff) {
            return 0.0;
        }
        self.grid[grid_index(k, self.cutoff)]
    }

    /// Retained `(k, ρ̂(k))` over the full lattice, `k ≠ 0`.
    pub fn modes(&self) -> impl Iterator<Item = ([i32; 3], f64)> + '_ {
        lattice(self.cutoff)
            .filter(|k| *k != [0, 0, 0])
            .map(|k| (k, self.coefficient(k)))
    }

    pub fn retained(&self) -> usize {
        2 * self.half.len()
    }

    /// `Σ_{k≠0} |k|^p ρ̂(k)`.
    pub fn moment(&self, p: i32) -> f64 {
        let mut acc = Accumulator::<1>::new(Summation::Reproducible);
        for m in &self.half {
            acc.add(0, 2.0 * m.kv.norm().powi(p) * m.rho);
        }
        acc.get(0)
    }

    /// `(Σ|k|^{2n} ρ̂)^{1/2} / (2π^{3/2})`, so that `‖∇ⁿu‖_∞ ≤` this `· H^{1/2}`.
    pub fn derivative_constant(&self, n: i32) -> f64 {
        self.moment(2 * n).sqrt() / (2.0 * PI.powf(1.5))
    }

    /// `(Σ|k|⁴ ρ̂)^{1/2} / (2π^{3/2})`.
    pub fn decay_constant(&self) -> f64 {
        self.derivative_constant(2)
    }

    /// Evenness, non-negativity and finiteness of the retained sums,
    /// reported in the same shape as the whole-space kernel check.
    pub fn verify(&self) -> AdmissibilityReport {
        let mut odd = 0.0f64;
        let mut min = f64::INFINITY;
        for (k, v) in self.modes() {
            odd = odd.max((v - self.coefficient(k.map(|c| -c))).abs());
            min = min.min(v);
        }
        let s0 = self.moment(0);
        let s4 = self.moment(4);
        let cond = |id: &str, description: &str, passed: bool, metric: f64, detail: String| {
            ConditionResult {
                id: id.into(),
                description: description.into(),
                passed,
                metric,
                detail,
            }
        };
        AdmissibilityReport {
            kernel: self.description.clone(),
            conditions: vec![
                cond("A.1", "coefficients are even", odd == 0.0, odd, "max |rho(k) - rho(-k)|".into()),
                cond("A.2", "coefficients are non-negative", min >= 0.0, min, "min rho(k)".into()),
                cond("A.3", "sum of rho is finite and positive", s0.is_finite() && s0 > 0.0, s0, "sum rho(k)".into()),
                cond("A.4", "fourth moment is finite", s4.is_finite(), s4, "sum |k|^4 rho(k)".into()),
            ],
        }
    }
}

/// `ρ̂ = b̂²` on `|k|_∞ ≤ cutoff`.
///
/// The discarded part is measured out to `|k|_∞ ≤ max(2K, K + 4)`, both for
/// `Σρ̂` and `Σ|k|⁴ρ̂`; if either tail fraction exceeds `allowed_tail` the
/// cutoff is rejected.
pub fn make_bump_kernel(generator: &Generator, cutoff: i32, allowed_tail: f64) -> Result<LatticeKernel> {
    generator.validate()?;
    if !(allowed_tail >= 0.0) {
        return Err(VortexError::invalid("tail_fraction", "must be >= 0"));
    }
    let rho = |k: [i32; 3]| generator.eval(&kvec(k)).powi(2);
    let kernel = LatticeKernel::from_fn(cutoff, rho)?;
    let outer = (2 * cutoff).max(cutoff + 4);
    let mut kept = [Accumulator::<1>::new(Summation::Reproducible); 2];
    let mut tail = [Accumulator::<1>::new(Summation::Reproducible); 2];
    for k in lattice(outer) {
        if k == [0, 0, 0] {
            continue;
        }
        let v = rho(k);
        let k4 = kvec(k).norm_squared().powi(2);
        let bucket = if k.iter().all(|c| c.abs() <= cutoff) { &mut kept } else { &mut tail };
        bucket[0].add(0, v);
        bucket[1].add(0, k4 * v);
    }
    let mut fraction = 0.0f64;
    for i in 0..2 {
        let t = tail[i].get(0);
        let total = kept[i].get(0) + t;
        if total > 0.0 {
            fraction = fraction.max(t / total);
        }
    }
    if fraction > allowed_tail {
        return Err(VortexError::CutoffTooSmall {
            cutoff,
            fraction,
            allowed: allowed_tail,
        });
    }
    let mut kernel = kernel;
    kernel.description = format!("bump {generator:?} K={cutoff}");
    Ok(kernel)
}

/// Wraps a coordinate into `[−π, π)`.
pub fn wrap(c: f64) -> f64 {
    let w = c - 2.0 * PI * ((c + PI) / (2.0 * PI)).floor();
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

pub fn wrap_point(x: &Vec3) -> Vec3 {
    x.map(wrap)
}

/// `cos(j x_d), sin(j x_d)` for `j = 0..=K` and each axis.
#[derive(Debug, Clone)]
struct Phases {
    table: [Vec<(f64, f64)>; 3],
}

impl Phases {
    fn new(x: &Vec3, cutoff: i32) -> Self {
        let table = [0, 1, 2].map(|d| {
            (0..=cutoff)
                .map(|j| {
                    let (s, c) = (j as f64 * x[d]).sin_cos();
                    (c, s)
                })
                .collect()
        });
        Phases { table }
    }

    /// `e^{i⟨k, x⟩}` as `(cos, sin)`.
    #[inline]
    fn at(&self, k: [i32; 3]) -> (f64, f64) {
        let mut re = 1.0;
        let mut im = 0.0;
        for (d, &kd) in k.iter().enumerate() {
            let (c, s) = self.table[d][kd.unsigned_abs() as usize];
            let s = if kd < 0 { -s } else { s };
            let (r, i) = (re * c - im * s, re * s + im * c);
            re = r;
            im = i;
        }
        (re, im)
    }
}

#[derive(Debug, Clone)]
pub struct LoopSystem {
    positions: Vec<Vec3>,
    moments: Vec<Vec3>,
    kernel: Arc<LatticeKernel>,
    mode: Summation,
}

impl LoopSystem {
    pub fn new(positions: Vec<Vec3>, moments: Vec<Vec3>, kernel: Arc<LatticeKernel>) -> Result<Self> {
        if positions.is_empty() {
            return Err(VortexError::invalid("positions", "need at least one loop"));
        }
        if positions.len() != moments.len() {
            return Err(VortexError::invalid(
                "moments",
                format!("{} moments for {} positions", moments.len(), positions.len()),
            ));
        }
        for (name, v) in [("positions", &positions), ("moments", &moments)] {
            if let Some(i) = v.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
                return Err(VortexError::invalid(name, format!("entry {i} is not finite")));
            }
        }
        Ok(LoopSystem {
            positions: positions.iter().map(wrap_point).collect(),
            moments,
            kernel,
            mode: Summation::default(),
        })
    }

    pub fn with_summation(mut self, mode: Summation) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_state(&self, positions: Vec<Vec3>, moments: Vec<Vec3>) -> Result<Self> {
        Ok(LoopSystem::new(positions, moments, self.kernel.clone())?.with_summation(self.mode))
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn moments(&self) -> &[Vec3] {
        &self.moments
    }

    pub fn kernel(&self) -> &LatticeKernel {
        &self.kernel
    }

    pub fn kernel_arc(&self) -> Arc<LatticeKernel> {
        self.kernel.clone()
    }

    pub fn summation(&self) -> Summation {
        self.mode
    }

    fn phases(&self) -> Vec<Phases> {
        self.positions
            .iter()
            .map(|x| Phases::new(x, self.kernel.cutoff))
            .collect()
    }

    /// `u`, `∇u` (Jacobian layout) and optionally `∇²u` at a point whose
    /// phase table is `px`.
    fn eval(&self, px: &Phases, sources: &[Phases], second: bool) -> (Vec3, Mat3, Tensor3) {
        let scale = 2.0 / (2.0 * PI).powi(3);
        let mut acc = Accumulator::<12>::new(self.mode);
        let mut acc2 = Accumulator::<27>::new(self.mode);
        for mode in &self.kernel.half {
            let (cx, sx) = px.at(mode.k);
            let mut c = Vec3::zeros();
            let mut s = Vec3::zeros();
            for (pb, m) in sources.iter().zip(&self.moments) {
                let (cb, sb) = pb.at(mode.k);
                // e^{i⟨k, x − x_β⟩}
                let re = cx * cb + sx * sb;
                let im = sx * cb - cx * sb;
                c += m * re;
                s += m * im;
            }
            let w = scale * mode.rho;
            let pc = mode.proj * c * w;
            let ps = mode.proj * s * w;
            acc.add_vec(0, &pc);
            acc.add_mat(3, &(-ps * mode.kv.transpose()));
            if second {
                let kk = mode.kv * mode.kv.transpose();
                for j in 0..3 {
                    acc2.add_mat(9 * j, &(kk * -pc[j]));
                }
            }
        }
        let d2 = if second {
            [acc2.mat(0), acc2.mat(9), acc2.mat(18)]
        } else {
            [Mat3::zeros(); 3]
        };
        (acc.vec(0), acc.mat(3), d2)
    }

    pub fn velocity(&self, x: &Vec3) -> Vec3 {
        self.velocity_and_gradient(x).0
    }

    /// `du[(j, l)] = ∂_l u^j`.
    pub fn velocity_gradient(&self, x: &Vec3) -> Mat3 {
        self.velocity_and_gradient(x).1
    }

    pub fn velocity_and_gradient(&self, x: &Vec3) -> (Vec3, Mat3) {
        let (u, du, _) = self.eval(&Phases::new(x, self.kernel.cutoff), &self.phases(), false);
        (u, du)
    }

    /// `(u, ∇u, ∇²u)` with `d2u[j][(l, m)] = ∂_l ∂_m u^j`.
    pub fn jet(&self, x: &Vec3) -> (Vec3, Mat3, Tensor3) {
        self.eval(&Phases::new(x, self.kernel.cutoff), &self.phases(), true)
    }

    /// Velocities and gradients at many points.
    pub fn jets_at(&self, targets: &[Vec3]) -> Vec<(Vec3, Mat3, Tensor3)> {
        let sources = self.phases();
        targets
            .par_iter()
            .map(|x| self.eval(&Phases::new(x, self.kernel.cutoff), &sources, true))
            .collect()
    }

    /// `(ẋ_α, ṁ_α) = (u(x_α), −(∇u(x_α))ᵀ m_α)`.
    pub fn rhs(&self) -> (Vec<Vec3>, Vec<Vec3>) {
        let sources = self.phases();
        (0..self.len())
            .into_par_iter()
            .map(|a| {
                let (u, du, _) = self.eval(&sources[a], &sources, false);
                (u, -(du.transpose() * self.moments[a]))
            })
            .unzip()
    }

    pub fn energy(&self) -> f64 {
        let sources = self.phases();
        let parts: Vec<f64> = self
            .kernel
            .half
            .par_iter()
            .map(|mode| {
                let mut c = Vec3::zeros();
                let mut s = Vec3::zeros();
                for (p, m) in sources.iter().zip(&self.moments) {
                    let (cb, sb) = p.at(mode.k);
                    c += m * cb;
                    s += m * sb;
                }
                mode.rho * ((mode.proj * c).norm_squared() + (mode.proj * s).norm_squared())
            })
            .collect();
        let mut acc = Accumulator::<1>::new(self.mode);
        for p in parts {
            acc.add(0, p);
        }
        acc.get(0) / (2.0 * PI).powi(3)
    }

    /// `(Σ|m_α|, Σ|m_α|²)`.
    pub fn length_and_variation(&self) -> (f64, f64) {
        let mut acc = Accumulator::<2>::new(self.mode);
        for m in &self.moments {
            let n2 = m.norm_squared();
            acc.add(0, n2.sqrt());
            acc.add(1, n2);
        }
        (acc.get(0), acc.get(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(k: i32) -> Arc<LatticeKernel> {
        Arc::new(make_bump_kernel(&Generator::Gaussian { width: 1.0 }, k, 1e-10).unwrap())
    }

    #[test]
    fn wrap_lands_in_box() {
        for c in [-10.0, -PI, -3.0, 0.0, 3.0, PI, 7.5, 1e3] {
            let w = wrap(c);
            assert!((-PI..PI).contains(&w), "{c} -> {w}");
            let turns = (c - w) / (2.0 * PI);
            assert!((turns - turns.round()).abs() < 1e-9);
        }
    }

    #[test]
    fn bump_kernel_is_even_and_positive() {
        let k = gaussian(8);
        for (kk, v) in k.modes() {
            assert!(v > 0.0);
            assert_eq!(v, k.coefficient(kk.map(|c| -c)));
        }
        let want = (-0.5f64 * 3.0).exp();
        assert!((k.coefficient([1, 1, 1]) - want).abs() < 1e-16);
    }

    #[test]
    fn small_cutoff_is_rejected() {
        let err = make_bump_kernel(&Generator::Gaussian { width: 0.3 }, 3, 1e-10).unwrap_err();
        assert!(matches!(err, VortexError::CutoffTooSmall { .. }));
    }

    #[test]
    fn single_loop_translates_along_its_axis() {
        let k = gaussian(8);
        let m = Vec3::new(0.3, -0.2, 0.9);
        let s = LoopSystem::new(vec![Vec3::new(0.4, 1.0, -2.0)], vec![m], k.clone()).unwrap();
        let (xd, md) = s.rhs();
        assert_eq!(md[0], Vec3::zeros());
        let want = m * (2.0 * k.moment(0) / 3.0) / (2.0 * PI).powi(3);
        assert!((xd[0] - want).norm() < 1e-13 * want.norm());
    }

    #[test]
    fn zero_moments_give_zero_field() {
        let k = Arc::new(make_bump_kernel(&Generator::Gaussian { width: 1.0 }, 4, 1.0).unwrap());
        let s = LoopSystem::new(vec![Vec3::zeros(); 2], vec![Vec3::zeros(); 2], k).unwrap();
        assert_eq!(s.velocity(&Vec3::new(0.1, 0.2, 0.3)), Vec3::zeros());
        assert_eq!(s.energy(), 0.0);
    }
}
