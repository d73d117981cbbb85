//! Smoothing kernels for the regularized Biot–Savart law.
//!
//! A kernel `φ` is admissible when it is even, has a non-negative and
//! integrable Fourier transform `φ̂(k) = ∫ e^{i⟨k,x⟩} φ(x) dx`, and
//! `∫ (1 + |k|²)² φ̂(k) dk` is finite. The velocity induced by a set of
//! vortex elements is `u(x) = Σ ∇φ(x − x_α) ∧ ξ_α`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Result, VortexError};
use crate::quadrature::{integrate_adaptive, integrate_half_line, Estimate, Tolerance};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Third derivative tensor, `t[i][(j, k)] = ∂_i ∂_j ∂_k φ`.
pub type Tensor3 = [Mat3; 3];

pub fn tensor_norm(t: &Tensor3) -> f64 {
    t.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

/// A kernel supplied from outside the crate.
///
/// Implementors provide physical-space derivatives and the Fourier
/// transform; nothing is transformed numerically. Spectral moments are
/// integrated along the `k_x` axis, so the transform is assumed radial.
pub trait CustomKernel: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn value(&self, x: &Vec3) -> f64;
    fn gradient(&self, x: &Vec3) -> Vec3;
    fn hessian(&self, x: &Vec3) -> Mat3;
    fn fourier(&self, k: &Vec3) -> f64;
    /// Characteristic length of the kernel, used to place sampling grids.
    fn length_scale(&self) -> f64;

    /// Central differences of the Hessian unless overridden.
    fn third(&self, x: &Vec3) -> Tensor3 {
        let h = 1e-4 * self.length_scale();
        let mut t = [Mat3::zeros(); 3];
        for (i, ti) in t.iter_mut().enumerate() {
            let mut e = Vec3::zeros();
            e[i] = h;
            *ti = (self.hessian(&(x + e)) - self.hessian(&(x - e))) / (2.0 * h);
        }
        t
    }
}

/// Smoothing kernel `φ`.
#[derive(Clone)]
pub enum Kernel {
    /// `φ(x) = (Γ/4π)(|x|² + μ²)^{-1/2}`.
    Rosenhead { gamma: f64, mu: f64 },
    /// `φ(x) = Γ exp(-|x|²/(2σ²))`.
    Gaussian { gamma: f64, sigma: f64 },
    Custom(Arc<dyn CustomKernel>),
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(VortexError::invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(VortexError::invalid(name, format!("must be finite, got {v}")))
    }
}

impl Kernel {
    pub fn rosenhead(gamma: f64, mu: f64) -> Result<Self> {
        check_finite("gamma", gamma)?;
        check_positive("mu", mu)?;
        Ok(Kernel::Rosenhead { gamma, mu })
    }

    pub fn gaussian(gamma: f64, sigma: f64) -> Result<Self> {
        check_finite("gamma", gamma)?;
        check_positive("sigma", sigma)?;
        Ok(Kernel::Gaussian { gamma, sigma })
    }

    pub fn custom(kernel: Arc<dyn CustomKernel>) -> Self {
        Kernel::Custom(kernel)
    }

    pub fn describe(&self) -> String {
        match self {
            Kernel::Rosenhead { gamma, mu } => format!("rosenhead gamma={gamma} mu={mu}"),
            Kernel::Gaussian { gamma, sigma } => format!("gaussian gamma={gamma} sigma={sigma}"),
            Kernel::Custom(k) => k.name(),
        }
    }

    pub fn length_scale(&self) -> f64 {
        match self {
            Kernel::Rosenhead { mu, .. } => *mu,
            Kernel::Gaussian { sigma, .. } => *sigma,
            Kernel::Custom(k) => k.length_scale(),
        }
    }

    /// Same kernel with circulation multiplied by `factor`; `None` for
    /// custom kernels.
    pub fn scaled(&self, factor: f64) -> Option<Kernel> {
        match self {
            Kernel::Rosenhead { gamma, mu } => Some(Kernel::Rosenhead {
                gamma: gamma * factor,
                mu: *mu,
            }),
            Kernel::Gaussian { gamma, sigma } => Some(Kernel::Gaussian {
                gamma: gamma * factor,
                sigma: *sigma,
            }),
            Kernel::Custom(_) => None,
        }
    }

    /// Derivatives `[f, f', f'', f''']` of the profile `φ(x) = f(|x|²)`.
    #[inline]
    fn profile(&self, s: f64) -> Option<[f64; 4]> {
        match *self {
            Kernel::Rosenhead { gamma, mu } => {
                let c = gamma / (4.0 * PI);
                let q = 1.0 / (s + mu * mu);
                let f = c * q.sqrt();
                Some([f, -0.5 * f * q, 0.75 * f * q * q, -1.875 * f * q * q * q])
            }
            Kernel::Gaussian { gamma, sigma } => {
                let a = 0.5 / (sigma * sigma);
                let f = gamma * (-a * s).exp();
                Some([f, -a * f, a * a * f, -a * a * a * f])
            }
            Kernel::Custom(_) => None,
        }
    }

    #[inline]
    pub fn value(&self, x: &Vec3) -> f64 {
        match self {
            Kernel::Custom(k) => k.value(x),
            _ => self.profile(x.norm_squared()).unwrap()[0],
        }
    }

    #[inline]
    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        match self {
            Kernel::Custom(k) => k.gradient(x),
            _ => {
                let p = self.profile(x.norm_squared()).unwrap();
                x * (2.0 * p[1])
            }
        }
    }

    #[inline]
    pub fn hessian(&self, x: &Vec3) -> Mat3 {
        match self {
            Kernel::Custom(k) => k.hessian(x),
            _ => {
                let p = self.profile(x.norm_squared()).unwrap();
                radial_hessian(x, &p)
            }
        }
    }

    pub fn third(&self, x: &Vec3) -> Tensor3 {
        match self {
            Kernel::Custom(k) => k.third(x),
            _ => {
                let p = self.profile(x.norm_squared()).unwrap();
                radial_third(x, &p)
            }
        }
    }

    /// Value, gradient, Hessian and third derivatives in one evaluation.
    #[inline]
    pub fn jet(&self, x: &Vec3) -> (f64, Vec3, Mat3, Tensor3) {
        match self {
            Kernel::Custom(k) => (k.value(x), k.gradient(x), k.hessian(x), k.third(x)),
            _ => {
                let p = self.profile(x.norm_squared()).unwrap();
                (p[0], x * (2.0 * p[1]), radial_hessian(x, &p), radial_third(x, &p))
            }
        }
    }

    /// Value, gradient and Hessian in one evaluation.
    #[inline]
    pub fn jet2(&self, x: &Vec3) -> (f64, Vec3, Mat3) {
        match self {
            Kernel::Custom(k) => (k.value(x), k.gradient(x), k.hessian(x)),
            _ => {
                let p = self.profile(x.norm_squared()).unwrap();
                (p[0], x * (2.0 * p[1]), radial_hessian(x, &p))
            }
        }
    }

    /// `φ̂(k)`; `+∞` for the Rosenhead kernel at `k = 0`.
    pub fn fourier(&self, k: &Vec3) -> f64 {
        match self {
            Kernel::Custom(c) => c.fourier(k),
            _ => self.fourier_radial(k.norm()),
        }
    }

    /// `φ̂` as a function of `|k|`.
    pub fn fourier_radial(&self, k: f64) -> f64 {
        match *self {
            Kernel::Rosenhead { gamma, mu } => rosenhead_fourier(gamma, mu, k),
            Kernel::Gaussian { gamma, sigma } => {
                gamma * (2.0 * PI).powf(1.5) * sigma.powi(3) * (-0.5 * sigma * sigma * k * k).exp()
            }
            Kernel::Custom(ref c) => c.fourier(&Vec3::new(k, 0.0, 0.0)),
        }
    }

    /// Spectral moments `∫ |k|^{2j} φ̂(k) dk` for `j = 0..=3`.
    pub fn spectral_moments(&self, tol: Tolerance) -> Result<SpectralMoments> {
        let ell = self.length_scale();
        let centre = (1.0 / ell).ln();
        let mut integrals = [Estimate { value: 0.0, error: 0.0 }; 4];
        for (j, slot) in integrals.iter_mut().enumerate() {
            let p = 2 * (j as i32) + 2;
            let est = integrate_half_line(
                |r| 4.0 * PI * r.powi(p) * self.fourier_radial(r),
                centre - 40.0,
                centre + 9.0,
                tol,
            )?;
            *slot = est;
        }
        Ok(SpectralMoments { integrals })
    }

    /// `sup_x ‖∇^{n+1} φ(x)‖` (Frobenius) for `n = 0, 1, 2`, plus `sup |φ|`.
    ///
    /// Sampled along the coordinate axes and diagonals out to twelve
    /// length scales, with golden-section polishing of the best sample.
    pub fn derivative_sups(&self) -> DerivativeSups {
        let ell = self.length_scale();
        let dirs = [
            Vec3::x(),
            Vec3::y(),
            Vec3::z(),
            Vec3::new(1.0, 1.0, 0.0).normalize(),
            Vec3::new(1.0, 1.0, 1.0).normalize(),
        ];
        let radial = !matches!(self, Kernel::Custom(_));
        let dirs = if radial { &dirs[..1] } else { &dirs[..] };
        let norms = |x: &Vec3| -> [f64; 4] {
            let (v, g, h, t) = self.jet(x);
            [v.abs(), g.norm(), h.norm(), tensor_norm(&t)]
        };
        let mut best = [0.0f64; 4];
        for d in dirs {
            let n = 2400;
            let rmax = 12.0 * ell;
            for slot in 0..4 {
                let f = |r: f64| norms(&(d * r))[slot];
                let mut arg = 0.0;
                let mut val = f(0.0);
                for i in 1..=n {
                    let r = rmax * i as f64 / n as f64;
                    let v = f(r);
                    if v > val {
                        val = v;
                        arg = r;
                    }
                }
                let h = rmax / n as f64;
                let (mut a, mut b) = ((arg - h).max(0.0), arg + h);
                let g = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..60 {
                    let c = b - g * (b - a);
                    let e = a + g * (b - a);
                    if f(c) > f(e) {
                        b = e;
                    } else {
                        a = c;
                    }
                }
                val = val.max(f(0.5 * (a + b)));
                best[slot] = best[slot].max(val);
            }
        }
        DerivativeSups {
            value: best[0],
            derivative: [best[1], best[2], best[3]],
        }
    }
}

#[inline]
fn radial_hessian(x: &Vec3, p: &[f64; 4]) -> Mat3 {
    let mut h = x * x.transpose() * (4.0 * p[2]);
    for i in 0..3 {
        h[(i, i)] += 2.0 * p[1];
    }
    h
}

#[inline]
fn radial_third(x: &Vec3, p: &[f64; 4]) -> Tensor3 {
    let a = 4.0 * p[2];
    let b = 8.0 * p[3];
    let mut t = [Mat3::zeros(); 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in j..3 {
                let mut v = b * x[i] * x[j] * x[k];
                if i == j {
                    v += a * x[k];
                }
                if i == k {
                    v += a * x[j];
                }
                if j == k {
                    v += a * x[i];
                }
                t[i][(j, k)] = v;
                t[i][(k, j)] = v;
            }
        }
    }
    t
}

/// `φ̂_R(k) = (Γ/4) ∫_0^∞ t^{-2} exp(-|k|²/(4t) - tμ²) dt`, integrated in
/// `s = ln t` with the peak factored out.
fn rosenhead_fourier(gamma: f64, mu: f64, k: f64) -> f64 {
    if k == 0.0 {
        return if gamma == 0.0 { 0.0 } else { f64::INFINITY * gamma.signum() };
    }
    let a = 0.25 * k * k;
    let b = mu * mu;
    let log_g = |s: f64| -s - a * (-s).exp() - b * s.exp();
    // stationary point of the concave exponent: b y² + y - a = 0, y = e^s
    let y = 2.0 * a / (1.0 + (1.0 + 4.0 * a * b).sqrt());
    let s_peak = y.ln();
    let l_peak = log_g(s_peak);
    const DROP: f64 = 46.0;
    let mut lo = s_peak;
    while log_g(lo) > l_peak - DROP {
        lo -= 0.5;
    }
    let mut hi = s_peak;
    while log_g(hi) > l_peak - DROP {
        hi += 0.5;
    }
    let n = ((hi - lo) / 2.0).ceil().max(1.0) as usize;
    let breaks: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let est = integrate_adaptive(
        |s| (log_g(s) - l_peak).exp(),
        &breaks,
        Tolerance {
            abs: 1e-15,
            rel: 1e-13,
        },
    )
    .expect("log-concave integrand converges");
    0.25 * gamma * est.value * l_peak.exp()
}

/// `∫ |k|^{2j} φ̂(k) dk` for `j = 0..=3` with quadrature error estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralMoments {
    pub integrals: [Estimate; 4],
}

impl SpectralMoments {
    /// `M_n = ∫ |k|^{2(1+n)} φ̂`, which controls `‖∇ⁿu‖_∞`.
    pub fn m(&self, n: usize) -> f64 {
        self.integrals[n + 1].value
    }

    /// `∫ |k|^{2n} φ̂`, which controls `‖∇ⁿΨ‖_∞`.
    pub fn psi(&self, n: usize) -> f64 {
        self.integrals[n].value
    }

    /// `C_n = M_n^{1/2} / (2π^{3/2})`, so that `‖∇ⁿu‖_∞ ≤ C_n H^{1/2}`.
    pub fn velocity_constant(&self, n: usize) -> f64 {
        self.m(n).sqrt() / (2.0 * PI.powf(1.5))
    }

    /// Same constant for `‖∇ⁿΨ‖_∞`.
    pub fn psi_constant(&self, n: usize) -> f64 {
        self.psi(n).sqrt() / (2.0 * PI.powf(1.5))
    }
}

/// Suprema of `|φ|` and of the Frobenius norms of `∇φ, ∇²φ, ∇³φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeSups {
    pub value: f64,
    /// `c_{n,φ} = sup ‖∇^{n+1}φ‖` for `n = 0, 1, 2`.
    pub derivative: [f64; 3],
}

/// Probe kernel `φ(x) = Γ cos(ω|x|) exp(-|x|²/(2σ²))`.
///
/// Its transform changes sign for large `ωσ`, so it is useful for
/// exercising the admissibility check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatoryProbe {
    pub gamma: f64,
    pub omega: f64,
    pub sigma: f64,
}

impl OscillatoryProbe {
    pub fn new(gamma: f64, omega: f64, sigma: f64) -> Result<Self> {
        check_finite("gamma", gamma)?;
        check_finite("omega", omega)?;
        check_positive("sigma", sigma)?;
        Ok(OscillatoryProbe { gamma, omega, sigma })
    }

    fn radial(&self, r: f64) -> [f64; 3] {
        let (w, s2) = (self.omega, self.sigma * self.sigma);
        let g = self.gamma * (-0.5 * r * r / s2).exp();
        let (sn, cs) = (w * r).sin_cos();
        let f = cs * g;
        let f1 = g * (-w * sn - r / s2 * cs);
        let f2 = g * (-w * w * cs + 2.0 * r / s2 * w * sn - cs / s2 + r * r / (s2 * s2) * cs);
        [f, f1, f2]
    }
}

impl CustomKernel for OscillatoryProbe {
    fn name(&self) -> String {
        format!(
            "oscillatory gamma={} omega={} sigma={}",
            self.gamma, self.omega, self.sigma
        )
    }

    fn value(&self, x: &Vec3) -> f64 {
        self.radial(x.norm())[0]
    }

    fn gradient(&self, x: &Vec3) -> Vec3 {
        let r = x.norm();
        if r < 1e-12 * self.sigma {
            return x * self.radial(0.0)[2];
        }
        x * (self.radial(r)[1] / r)
    }

    fn hessian(&self, x: &Vec3) -> Mat3 {
        let r = x.norm();
        if r < 1e-6 * self.sigma {
            return Mat3::identity() * self.radial(0.0)[2];
        }
        let [_, f1, f2] = self.radial(r);
        let n = x / r;
        let p = n * n.transpose();
        p * f2 + (Mat3::identity() - p) * (f1 / r)
    }

    fn fourier(&self, k: &Vec3) -> f64 {
        let k = k.norm().max(1e-6);
        let (w, s) = (self.omega, self.sigma);
        let lobe = |b: f64| b * (-0.5 * b * b * s * s).exp();
        self.gamma * (4.0 * PI / k) * 0.5 * (PI / 2.0).sqrt() * s.powi(3) * (lobe(k + w) + lobe(k - w))
    }

    fn length_scale(&self) -> f64 {
        self.sigma
    }
}

/// Sampling plan for the admissibility check.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSpec {
    pub radii: Vec<f64>,
    pub directions: Vec<Vec3>,
    pub wavenumbers: Vec<f64>,
    pub evenness_tol: f64,
    pub positivity_tol: f64,
    pub quadrature: Tolerance,
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

impl Default for SamplingSpec {
    fn default() -> Self {
        let mut directions = vec![
            Vec3::x(),
            Vec3::y(),
            Vec3::z(),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(1.0, 0.0, 1.0),
            Vec3::new(0.0, 1.0, 1.0),
            Vec3::new(1.0, -1.0, 0.0),
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(1.0, -1.0, 1.0),
            Vec3::new(0.3, -0.7, 0.2),
            Vec3::new(-0.9, 0.1, 0.45),
        ];
        for d in &mut directions {
            *d = d.normalize();
        }
        SamplingSpec {
            radii: log_grid(1e-3, 1e2, 41),
            directions,
            wavenumbers: log_grid(1e-2, 1e2, 121),
            evenness_tol: 0.0,
            positivity_tol: 0.0,
            quadrature: Tolerance::default(),
        }
    }
}

/// Outcome of one admissibility condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub id: String,
    pub description: String,
    pub passed: bool,
    pub metric: f64,
    pub detail: String,
}

/// Per-condition admissibility verdicts for one kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub kernel: String,
    pub conditions: Vec<ConditionResult>,
}

impl AdmissibilityReport {
    pub fn all_passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn failed_ids(&self) -> Vec<&str> {
        self.conditions
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.id.as_str())
            .collect()
    }
}

impl fmt::Display for AdmissibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "kernel: {}", self.kernel)?;
        for c in &self.conditions {
            writeln!(
                f,
                "  {} [{}] {}: {} ({})",
                c.id,
                if c.passed { "pass" } else { "FAIL" },
                c.description,
                c.metric,
                c.detail
            )?;
        }
        Ok(())
    }
}

/// Checks evenness, transform positivity and the two spectral
/// integrability conditions on the given sampling plan.
pub fn verify_admissibility(kernel: &Kernel, spec: &SamplingSpec) -> AdmissibilityReport {
    let mut conditions = Vec::with_capacity(4);

    let mut residual = 0.0f64;
    for d in &spec.directions {
        for &r in &spec.radii {
            let x = d * r;
            let diff = (kernel.value(&x) - kernel.value(&-x)).abs();
            residual = if diff.is_nan() { f64::NAN } else { residual.max(diff) };
        }
    }
    conditions.push(ConditionResult {
        id: "A.1".into(),
        description: "kernel is even".into(),
        passed: residual <= spec.evenness_tol,
        metric: residual,
        detail: format!("max |phi(x) - phi(-x)| over {} samples", spec.directions.len() * spec.radii.len()),
    });

    let mut min_val = f64::INFINITY;
    let mut argmin = 0.0;
    for d in &spec.directions {
        for &k in &spec.wavenumbers {
            let v = kernel.fourier(&(d * k));
            if v.is_nan() || v < min_val {
                min_val = v;
                argmin = k;
            }
        }
    }
    conditions.push(ConditionResult {
        id: "A.2".into(),
        description: "Fourier transform is non-negative".into(),
        passed: min_val >= -spec.positivity_tol,
        metric: min_val,
        detail: format!("min phi_hat at |k| = {argmin}"),
    });

    let moments = kernel.spectral_moments(spec.quadrature);
    let (a3, a4) = match &moments {
        Ok(m) => {
            let psi0 = m.integrals[0];
            let a4_val = m.psi(0) + 2.0 * m.m(0) + m.m(1);
            let ok3 = psi0.value.is_finite() && psi0.value > 0.0;
            let ok4 = a4_val.is_finite() && m.m(1).is_finite() && m.m(1) > 0.0;
            (
                (ok3, psi0.value, format!("int phi_hat dk, quadrature error {:e}", psi0.error)),
                (ok4, a4_val, format!("int (1+|k|^2)^2 phi_hat dk; M_1 = {}", m.m(1))),
            )
        }
        Err(e) => (
            (false, f64::NAN, e.to_string()),
            (false, f64::NAN, e.to_string()),
        ),
    };
    conditions.push(ConditionResult {
        id: "A.3".into(),
        description: "Fourier transform is integrable".into(),
        passed: a3.0,
        metric: a3.1,
        detail: a3.2,
    });
    conditions.push(ConditionResult {
        id: "A.4".into(),
        description: "fourth spectral moment is finite".into(),
        passed: a4.0,
        metric: a4.1,
        detail: a4.2,
    });

    AdmissibilityReport {
        kernel: kernel.describe(),
        conditions,
    }
}
