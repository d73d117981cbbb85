//! Vortex blob model: independent `(x_α, ξ_α)` pairs, with positions
//! advected by `u` and vectors stretched as `ξ̇_α = (ξ_α · ∇) u(x_α)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, VortexError};
use crate::field::{EnergyBreakdown, Field, SegmentSet};
use crate::filament::{RateOptions, ROUNDING};
use crate::kernel::{Kernel, Vec3};
use crate::quadrature::GaussLegendre;
use crate::sum::{Accumulator, Summation};

/// `dH/dt = Σ⟨ξ_β, ∇Φ(x_β)⟩`, also reported as `boundary_term + theta_term`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlobRate {
    pub grad_phi_term: f64,
    /// `Σ [Φ(x_β + ξ_β) − Φ(x_β)]`
    pub boundary_term: f64,
    /// `−Σ ⟨ξ_β, Θ_β ξ_β⟩`
    pub theta_term: f64,
    /// `Σ ⟨Ψ(x_β), ξ̇_β − (ξ_β·∇)u(x_β)⟩`, zero for this model.
    pub g_term: f64,
    pub order: usize,
}

impl BlobRate {
    pub fn total(&self) -> f64 {
        self.g_term + self.grad_phi_term
    }
}

#[derive(Debug, Clone)]
pub struct BlobSystem {
    positions: Vec<Vec3>,
    vectors: Vec<Vec3>,
    kernel: Kernel,
    mode: Summation,
}

impl BlobSystem {
    pub fn new(positions: Vec<Vec3>, vectors: Vec<Vec3>, kernel: Kernel) -> Result<Self> {
        let set = SegmentSet::open(positions, vectors)?;
        Ok(BlobSystem {
            positions: set.positions().to_vec(),
            vectors: set.vectors().to_vec(),
            kernel,
            mode: Summation::default(),
        })
    }

    pub fn with_summation(mut self, mode: Summation) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_state(&self, positions: Vec<Vec3>, vectors: Vec<Vec3>) -> Result<Self> {
        Ok(BlobSystem::new(positions, vectors, self.kernel.clone())?.with_summation(self.mode))
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

    pub fn vectors(&self) -> &[Vec3] {
        &self.vectors
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn summation(&self) -> Summation {
        self.mode
    }

    pub fn field(&self) -> Field<'_> {
        Field {
            kernel: &self.kernel,
            positions: &self.positions,
            vectors: &self.vectors,
            mode: self.mode,
        }
    }

    /// `(ẋ_α, ξ̇_α)` for every blob.
    pub fn rhs(&self) -> (Vec<Vec3>, Vec<Vec3>) {
        let field = self.field();
        let pairs = field.velocities_and_gradients_at(&self.positions);
        pairs
            .into_iter()
            .zip(&self.vectors)
            .map(|((u, du), xi)| (u, du * xi))
            .unzip()
    }

    pub fn energy(&self) -> EnergyBreakdown {
        self.field().energy()
    }

    /// `(L, A) = (Σ|ξ_α|, Σ|ξ_α|²)`.
    pub fn length_and_variation(&self) -> (f64, f64) {
        let mut acc = Accumulator::<2>::new(self.mode);
        for xi in &self.vectors {
            let n2 = xi.norm_squared();
            acc.add(0, n2.sqrt());
            acc.add(1, n2);
        }
        (acc.get(0), acc.get(1))
    }

    pub fn energy_rate(&self, opts: &RateOptions) -> Result<BlobRate> {
        opts.validate()?;
        let field = self.field();
        let (_, xi_dot) = self.rhs();
        let low = GaussLegendre::new(opts.order);
        let high = GaussLegendre::new(2 * opts.order);

        let per: Vec<[f64; 7]> = (0..self.len())
            .into_par_iter()
            .map(|b| {
                let x = self.positions[b];
                let xi = self.vectors[b];
                let base = field.jet(&x);
                let (_, du) = field.velocity_and_gradient(&x);
                let g = base.psi.dot(&(xi_dot[b] - du * xi));
                let grad = xi.dot(&base.grad_phi());
                let boundary = field.phi_aux(&(x + xi)) - base.phi();
                let mut theta = [0.0; 2];
                let mut magnitude = 0.0;
                for (slot, rule) in [&low, &high].into_iter().enumerate() {
                    let mut acc = Accumulator::<1>::new(self.mode);
                    for (&rho, &w) in rule.nodes.iter().zip(&rule.weights) {
                        let jet = field.jet(&(x + xi * rho));
                        let weight = w * (1.0 - rho);
                        acc.add(0, weight * xi.dot(&(jet.hess_phi() * xi)));
                        magnitude += weight * xi.norm_squared() * jet.hess_phi_magnitude();
                    }
                    theta[slot] = -acc.get(0);
                }
                [g, grad, boundary, theta[0], theta[1], theta[1].abs(), magnitude]
            })
            .collect();

        let mut discrepancy = 0.0;
        let mut scale = 0.0;
        let mut magnitude = 0.0;
        for p in &per {
            discrepancy += (p[3] - p[4]).abs();
            scale += p[5];
            magnitude += p[6];
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
        for p in &per {
            acc.add(0, p[0]);
            acc.add(1, p[1]);
            acc.add(2, p[2]);
            acc.add(3, p[4]);
        }
        Ok(BlobRate {
            g_term: acc.get(0),
            grad_phi_term: acc.get(1),
            boundary_term: acc.get(2),
            theta_term: acc.get(3),
            order: 2 * opts.order,
        })
    }

    /// `Σ ξ_α`, which the dynamics need not conserve.
    pub fn total_vector(&self) -> Vec3 {
        let mut acc = Accumulator::<3>::new(self.mode);
        for xi in &self.vectors {
            acc.add_vec(0, xi);
        }
        acc.vec(0)
    }

    /// `Σ Φ(x_α + ξ_α) / Σ Φ(x_α)`; close to one when the boundary terms
    /// nearly cancel.
    pub fn boundary_ratio(&self) -> f64 {
        let field = self.field();
        let mut acc = Accumulator::<2>::new(self.mode);
        for (x, xi) in self.positions.iter().zip(&self.vectors) {
            acc.add(0, field.phi_aux(&(x + xi)));
            acc.add(1, field.phi_aux(x));
        }
        acc.get(0) / acc.get(1)
    }
}
