//! Quadrature rules: fixed Gauss–Legendre for segment integrals and an
//! adaptive Gauss–Kronrod (7/15) integrator for spectral moments.

use std::collections::BinaryHeap;

use crate::error::{Result, VortexError};

/// Gauss–Legendre nodes and weights mapped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map [-1, 1] -> [0, 1]
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrates `f` over `[0, 1]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Absolute/relative tolerance pair for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-10,
            rel: 1e-8,
        }
    }
}

/// Value of an integral with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Estimate {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * h;
    let diff = ((kronrod - gauss) * h).abs();
    // QUADPACK-style scaling of |K - G|.
    let error = if diff == 0.0 {
        0.0
    } else {
        diff.min((200.0 * diff).powf(1.5))
    };
    Estimate { value, error }
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

const MAX_INTERVALS: usize = 2000;

/// Globally adaptive Gauss–Kronrod integration over `[a, b]`, seeded with
/// the given breakpoints (which must lie inside the interval, ascending).
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    assert!(breakpoints.len() >= 2);
    let mut heap = BinaryHeap::new();
    for w in breakpoints.windows(2) {
        let est = kronrod15(&mut f, w[0], w[1]);
        heap.push(Interval {
            a: w[0],
            b: w[1],
            est,
        });
    }
    loop {
        let (value, error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), iv| (v + iv.est.value, e + iv.est.error));
        if !value.is_finite() || !error.is_finite() {
            return Err(VortexError::NonConvergent {
                estimate: value,
                error,
                intervals: heap.len(),
            });
        }
        if error <= tol.abs.max(tol.rel * value.abs()) {
            return Ok(Estimate { value, error });
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(VortexError::NonConvergent {
                estimate: value,
                error,
                intervals: heap.len(),
            });
        }
        let worst = heap.pop().expect("non-empty interval heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(VortexError::NonConvergent {
                estimate: value,
                error,
                intervals: heap.len() + 1,
            });
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let est = kronrod15(&mut f, a, b);
            heap.push(Interval { a, b, est });
        }
    }
}

/// Integrates `g(r)` over `r ∈ (0, ∞)` through the substitution `r = e^s`.
///
/// The support in `s` is located by scanning `[s_lo, s_hi]` and trimming
/// both ends where the integrand is below `1e-20` of its sampled maximum.
pub fn integrate_half_line<F: FnMut(f64) -> f64>(
    mut g: F,
    s_lo: f64,
    s_hi: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    const STEP: f64 = 0.5;
    let mut h = |s: f64| {
        let r = s.exp();
        let v = g(r) * r;
        if v.is_finite() {
            v
        } else {
            f64::NAN
        }
    };
    let n = ((s_hi - s_lo) / STEP).ceil() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| s_lo + STEP * i as f64).collect();
    let samples: Vec<f64> = grid.iter().map(|&s| h(s)).collect();
    if samples.iter().any(|v| v.is_nan()) {
        return Err(VortexError::NonConvergent {
            estimate: f64::NAN,
            error: f64::INFINITY,
            intervals: 0,
        });
    }
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let cut = 1e-20 * peak;
    let first = samples.iter().position(|v| v.abs() > cut).unwrap_or(0);
    let last = samples.iter().rposition(|v| v.abs() > cut).unwrap_or(n);
    let lo = first.saturating_sub(1);
    let hi = (last + 1).min(n);
    if samples[lo].abs() > 1e-14 * peak || samples[hi].abs() > 1e-14 * peak {
        // support touches the scan window: integrand does not decay
        return Err(VortexError::NonConvergent {
            estimate: f64::NAN,
            error: f64::INFINITY,
            intervals: 0,
        });
    }
    let breaks: Vec<f64> = grid[lo..=hi].iter().step_by(2).copied().chain(
        if (hi - lo) % 2 == 1 { Some(grid[hi]) } else { None },
    ).collect();
    integrate_adaptive(h, &breaks, tol)
}
