//! Discrete vortex filament: a closed polyline whose nodes move with the
//! velocity induced by its own segments `ξ_α = x_{α+1} − x_α`.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{gronwall_length, BoundConstants};
use crate::error::{Result, VortexError};
use crate::field::{segments_of, EnergyBreakdown, Field, SegmentSet};
use crate::kernel::{Kernel, SpectralMoments, Vec3};
use crate::quadrature::GaussLegendre;
use crate::sum::{sum_slice, Accumulator, Summation};

/// Multiple of the term magnitudes below which quadrature discrepancies
/// are attributed to rounding.
pub(crate) const ROUNDING: f64 = 256.0 * f64::EPSILON;

/// Settings for the segment quadrature of `Θ` and `Θ̃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateOptions {
    /// Base Gauss–Legendre order; the result is taken at twice this order.
    pub order: usize,
    /// Allowed `Σ|J_p − J_2p| / Σ|J_2p|`.
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions {
            order: 8,
            rel_tol: 1e-6,
            abs_tol: 1e-300,
        }
    }
}

impl RateOptions {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(VortexError::invalid("order", "must be at least 1"));
        }
        if !(self.rel_tol >= 0.0 && self.abs_tol >= 0.0) {
            return Err(VortexError::invalid("tolerance", "must be non-negative"));
        }
        Ok(())
    }
}

/// `dH/dt` split as `term_g + term_boundary + term_theta`.
///
/// `term_g = Σ ⟨Ψ(x_β), Θ̃_β : ξ_β ⊗ ξ_β⟩` is the Taylor remainder of the
/// segment velocity difference, `term_boundary = Σ [Φ(x_{β+1}) − Φ(x_β)]`
/// and `term_theta = −Σ ⟨ξ_β, Θ_β ξ_β⟩`, where `Θ_β` and `Θ̃_β` are the
/// `(1 − ρ)`-weighted averages of `∇²Φ` and `∇²u` along segment `β`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyRate {
    pub term_g: f64,
    pub term_boundary: f64,
    pub term_theta: f64,
    pub total: f64,
    /// Per-segment `J_β = ⟨Ψ, Θ̃ ξξ⟩ − ⟨ξ, Θ ξ⟩`; sums to `term_g + term_theta`.
    pub scores: Vec<f64>,
    /// Scale of the boundary sum, `Σ |Φ(x_β)|`.
    pub phi_scale: f64,
    pub order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilamentFunctionals {
    /// `L = Σ |ξ_α|`
    pub length: f64,
    /// `A = Σ |ξ_α|²`
    pub variation: f64,
    pub energy: f64,
}

/// Length and quadratic variation of a closed polyline.
pub fn length_and_variation(nodes: &[Vec3], mode: Summation) -> (f64, f64) {
    let segs = segments_of(nodes);
    let mut acc = Accumulator::<2>::new(mode);
    for s in &segs {
        let n2 = s.norm_squared();
        acc.add(0, n2.sqrt());
        acc.add(1, n2);
    }
    (acc.get(0), acc.get(1))
}

#[derive(Debug, Clone)]
pub struct Filament {
    nodes: Vec<Vec3>,
    segments: Vec<Vec3>,
    kernel: Kernel,
    mode: Summation,
}

impl Filament {
    pub fn new(nodes: Vec<Vec3>, kernel: Kernel) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(VortexError::invalid(
                "nodes",
                format!("a closed filament needs at least 3 nodes, got {}", nodes.len()),
            ));
        }
        if let Some(i) = nodes.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(VortexError::invalid("nodes", format!("node {i} is not finite")));
        }
        let segments = segments_of(&nodes);
        Ok(Filament {
            nodes,
            segments,
            kernel,
            mode: Summation::default(),
        })
    }

    pub fn with_summation(mut self, mode: Summation) -> Self {
        self.mode = mode;
        self
    }

    /// Same kernel and summation mode, new nodes.
    pub fn with_nodes(&self, nodes: Vec<Vec3>) -> Result<Self> {
        Ok(Filament::new(nodes, self.kernel.clone())?.with_summation(self.mode))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn segments(&self) -> &[Vec3] {
        &self.segments
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn summation(&self) -> Summation {
        self.mode
    }

    pub fn segment_set(&self) -> SegmentSet {
        SegmentSet::closed(self.nodes.clone()).expect("filament nodes are validated")
    }

    pub fn field(&self) -> Field<'_> {
        Field {
            kernel: &self.kernel,
            positions: &self.nodes,
            vectors: &self.segments,
            mode: self.mode,
        }
    }

    /// Node velocities `ẋ_α = u(x_α)`.
    pub fn rhs(&self) -> Vec<Vec3> {
        self.field().velocities_at(&self.nodes)
    }

    pub fn energy(&self) -> EnergyBreakdown {
        self.field().energy()
    }

    pub fn length(&self) -> f64 {
        length_and_variation(&self.nodes, self.mode).0
    }

    pub fn variation(&self) -> f64 {
        length_and_variation(&self.nodes, self.mode).1
    }

    pub fn functionals(&self) -> FilamentFunctionals {
        let (length, variation) = length_and_variation(&self.nodes, self.mode);
        FilamentFunctionals {
            length,
            variation,
            energy: self.energy().total,
        }
    }

    /// `dH/dt` along the exact flow from `dH/dt = Σ⟨Ψ(x_β), ξ̇_β⟩ + Σ⟨ξ_β, ∇Ψ(x_β) ẋ_β⟩`,
    /// with no segment quadrature involved.
    pub fn direct_rate(&self) -> f64 {
        let field = self.field();
        let n = self.len();
        let vel = self.rhs();
        let terms: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|b| {
                let jet = field.jet(&self.nodes[b]);
                let xi_dot = vel[(b + 1) % n] - vel[b];
                jet.psi.dot(&xi_dot) + self.segments[b].dot(&(jet.dpsi * vel[b]))
            })
            .collect();
        sum_slice(&terms, self.mode)
    }

    /// Energy-rate decomposition with segment quadrature checked by order
    /// doubling.
    pub fn energy_rate(&self, opts: &RateOptions) -> Result<EnergyRate> {
        opts.validate()?;
        let field = self.field();
        let n = self.len();
        let low = GaussLegendre::new(opts.order);
        let high = GaussLegendre::new(2 * opts.order);

        struct Segment {
            phi: f64,
            g: [f64; 2],
            theta: [f64; 2],
            magnitude: f64,
        }

        let per: Vec<Segment> = (0..n)
            .into_par_iter()
            .map(|b| {
                let x = self.nodes[b];
                let xi = self.segments[b];
                let base = field.jet(&x);
                let mut g = [0.0; 2];
                let mut theta = [0.0; 2];
                let mut magnitude = 0.0;
                for (slot, rule) in [&low, &high].into_iter().enumerate() {
                    let mut acc = Accumulator::<2>::new(self.mode);
                    for (&rho, &w) in rule.nodes.iter().zip(&rule.weights) {
                        let jet = field.jet(&(x + xi * rho));
                        let weight = w * (1.0 - rho);
                        let mut d2u_xx = Vec3::zeros();
                        for k in 0..3 {
                            d2u_xx[k] = xi.dot(&(jet.d2u[k] * xi));
                        }
                        acc.add(0, weight * base.psi.dot(&d2u_xx));
                        acc.add(1, weight * xi.dot(&(jet.hess_phi() * xi)));
                        magnitude += weight * xi.norm_squared() * jet.hess_phi_magnitude();
                    }
                    g[slot] = acc.get(0);
                    theta[slot] = -acc.get(1);
                }
                Segment {
                    phi: base.phi(),
                    g,
                    theta,
                    magnitude,
                }
            })
            .collect();

        let mut discrepancy = 0.0;
        let mut scale = 0.0;
        let mut magnitude = 0.0;
        for s in &per {
            discrepancy += ((s.g[0] + s.theta[0]) - (s.g[1] + s.theta[1])).abs();
            scale += (s.g[1] + s.theta[1]).abs();
            magnitude += s.magnitude;
        }
        let tolerance = opts.abs_tol + opts.rel_tol * scale + ROUNDING * magnitude;
        if !(discrepancy <= tolerance) {
            return Err(VortexError::QuadratureOrderTooLow {
                order: opts.order,
                doubled: 2 * opts.order,
                discrepancy,
                tolerance,
            });
        }

        let mut acc = Accumulator::<4>::new(self.mode);
        let mut scores = Vec::with_capacity(n);
        for (b, s) in per.iter().enumerate() {
            acc.add(0, s.g[1]);
            acc.add(1, s.theta[1]);
            // Φ(x_{β+1}) − Φ(x_β), summed term by term so the telescoping is visible
            acc.add(2, per[(b + 1) % n].phi - s.phi);
            acc.add(3, s.phi.abs());
            scores.push(s.g[1] + s.theta[1]);
        }
        let (term_g, term_theta, term_boundary) = (acc.get(0), acc.get(1), acc.get(2));
        Ok(EnergyRate {
            term_g,
            term_boundary,
            term_theta,
            total: term_g + term_boundary + term_theta,
            scores,
            phi_scale: acc.get(3),
            order: 2 * opts.order,
        })
    }

    /// `L(0) exp(c₇ H_max^{1/2} t)` with `L(0)` the current length.
    pub fn gronwall_bound(&self, moments: &SpectralMoments, t: f64, h_max: f64) -> f64 {
        let c = BoundConstants::from_moments(moments);
        gronwall_length(self.length(), c.c7, h_max, t)
    }
}
