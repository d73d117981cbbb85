//! Pairwise evaluation of the velocity, its derivatives, the auxiliary
//! fields `Ψ(x) = Σ φ(x − x_α) ξ_α` and `Φ = Ψ · u`, and the energy
//! `H = ½ Σ_{α,β} φ(x_α − x_β) ⟨ξ_α, ξ_β⟩`.
//!
//! Gradients use the Jacobian layout: `du[(k, i)] = ∂_i u^k`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Result, VortexError};
use crate::kernel::{tensor_norm, Kernel, Mat3, SpectralMoments, Tensor3, Vec3};
use crate::sum::{Accumulator, Summation};

/// Positions `x_α` paired with vorticity vectors `ξ_α`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSet {
    positions: Vec<Vec3>,
    vectors: Vec<Vec3>,
    closed: bool,
}

fn check_finite_points(name: &str, pts: &[Vec3]) -> Result<()> {
    match pts.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
        Some(i) => Err(VortexError::invalid(name, format!("entry {i} is not finite"))),
        None => Ok(()),
    }
}

impl SegmentSet {
    /// Independent `(x_α, ξ_α)` pairs.
    pub fn open(positions: Vec<Vec3>, vectors: Vec<Vec3>) -> Result<Self> {
        if positions.is_empty() {
            return Err(VortexError::invalid("positions", "need at least one element"));
        }
        if positions.len() != vectors.len() {
            return Err(VortexError::invalid(
                "vectors",
                format!("{} vectors for {} positions", vectors.len(), positions.len()),
            ));
        }
        check_finite_points("positions", &positions)?;
        check_finite_points("vectors", &vectors)?;
        Ok(SegmentSet {
            positions,
            vectors,
            closed: false,
        })
    }

    /// Closed polyline with `ξ_α = x_{α+1} − x_α`.
    pub fn closed(nodes: Vec<Vec3>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(VortexError::invalid("nodes", "need at least one node"));
        }
        check_finite_points("nodes", &nodes)?;
        let vectors = segments_of(&nodes);
        Ok(SegmentSet {
            positions: nodes,
            vectors,
            closed: true,
        })
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

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn translated(&self, shift: &Vec3) -> SegmentSet {
        SegmentSet {
            positions: self.positions.iter().map(|p| p + shift).collect(),
            vectors: self.vectors.clone(),
            closed: self.closed,
        }
    }

    pub fn mapped(&self, rot: &Mat3) -> SegmentSet {
        SegmentSet {
            positions: self.positions.iter().map(|p| rot * p).collect(),
            vectors: self.vectors.iter().map(|v| rot * v).collect(),
            closed: self.closed,
        }
    }

    pub fn scaled_vectors(&self, factor: f64) -> SegmentSet {
        SegmentSet {
            positions: self.positions.clone(),
            vectors: self.vectors.iter().map(|v| v * factor).collect(),
            closed: self.closed,
        }
    }
}

pub fn segments_of(nodes: &[Vec3]) -> Vec<Vec3> {
    let n = nodes.len();
    (0..n).map(|a| nodes[(a + 1) % n] - nodes[a]).collect()
}

/// Everything needed for the energy-rate decomposition at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldJet {
    pub psi: Vec3,
    /// `dpsi[(k, i)] = ∂_i Ψ^k`
    pub dpsi: Mat3,
    /// `d2psi[k][(i, j)] = ∂_i ∂_j Ψ^k`
    pub d2psi: Tensor3,
    pub u: Vec3,
    pub du: Mat3,
    /// `d2u[k][(i, j)] = ∂_i ∂_j u^k`
    pub d2u: Tensor3,
}

impl FieldJet {
    pub fn phi(&self) -> f64 {
        self.psi.dot(&self.u)
    }

    pub fn grad_phi(&self) -> Vec3 {
        self.dpsi.transpose() * self.u + self.du.transpose() * self.psi
    }

    /// Size of the terms summed in [`FieldJet::hess_phi`], a scale for its
    /// rounding error.
    pub fn hess_phi_magnitude(&self) -> f64 {
        self.psi.norm() * tensor_norm(&self.d2u)
            + 2.0 * self.dpsi.norm() * self.du.norm()
            + tensor_norm(&self.d2psi) * self.u.norm()
    }

    pub fn hess_phi(&self) -> Mat3 {
        let mut h = self.dpsi.transpose() * self.du + self.du.transpose() * self.dpsi;
        for k in 0..3 {
            h += self.d2psi[k] * self.u[k] + self.d2u[k] * self.psi[k];
        }
        h
    }
}

/// Borrowed view used for all pairwise sums.
#[derive(Debug, Clone, Copy)]
pub struct Field<'a> {
    pub kernel: &'a Kernel,
    pub positions: &'a [Vec3],
    pub vectors: &'a [Vec3],
    pub mode: Summation,
}

impl<'a> Field<'a> {
    pub fn new(kernel: &'a Kernel, set: &'a SegmentSet) -> Self {
        Field {
            kernel,
            positions: &set.positions,
            vectors: &set.vectors,
            mode: Summation::Reproducible,
        }
    }

    pub fn with_mode(mut self, mode: Summation) -> Self {
        self.mode = mode;
        self
    }

    pub fn velocity(&self, x: &Vec3) -> Vec3 {
        let mut acc = Accumulator::<3>::new(self.mode);
        for (p, xi) in self.positions.iter().zip(self.vectors) {
            acc.add_vec(0, &self.kernel.gradient(&(x - p)).cross(xi));
        }
        acc.vec(0)
    }

    pub fn velocity_gradient(&self, x: &Vec3) -> Mat3 {
        let mut acc = Accumulator::<9>::new(self.mode);
        for (p, xi) in self.positions.iter().zip(self.vectors) {
            let h = self.kernel.hessian(&(x - p));
            acc.add_mat(0, &cross_columns(&h, xi));
        }
        acc.mat(0)
    }

    /// Velocity and its gradient from one pass over the sources.
    pub fn velocity_and_gradient(&self, x: &Vec3) -> (Vec3, Mat3) {
        let mut acc = Accumulator::<12>::new(self.mode);
        for (p, xi) in self.positions.iter().zip(self.vectors) {
            let (_, g, h) = self.kernel.jet2(&(x - p));
            acc.add_vec(0, &g.cross(xi));
            acc.add_mat(3, &cross_columns(&h, xi));
        }
        (acc.vec(0), acc.mat(3))
    }

    pub fn psi(&self, x: &Vec3) -> Vec3 {
        let mut acc = Accumulator::<3>::new(self.mode);
        for (p, xi) in self.positions.iter().zip(self.vectors) {
            acc.add_vec(0, &(xi * self.kernel.value(&(x - p))));
        }
        acc.vec(0)
    }

    /// `Φ(x) = ⟨Ψ(x), u(x)⟩`.
    pub fn phi_aux(&self, x: &Vec3) -> f64 {
        let mut acc = Accumulator::<6>::new(self.mode);
        for (p, xi) in self.positions.iter().zip(self.vectors) {
            let (v, g, _) = self.kernel.jet2(&(x - p));
            acc.add_vec(0, &(xi * v));
            acc.add_vec(3, &g.cross(xi));
        }
        acc.vec(0).dot(&acc.vec(3))
    }

    /// `∇Φ(x)` from first derivatives of `Ψ` and `u`.
    pub fn grad_phi(&self, x: &Vec3) -> Vec3 {
        let mut acc = Accumulator::<24>::new(self.mode);
        for (p, xi) in self.positions.iter().zip(self.vectors) {
            let (v, g, h) = self.kernel.jet2(&(x - p));
            acc.add_vec(0, &(xi * v));
            acc.add_mat(3, &(xi * g.transpose()));
            acc.add_vec(12, &g.cross(xi));
            acc.add_mat(15, &cross_columns(&h, xi));
        }
        let (psi, dpsi, u, du) = (acc.vec(0), acc.mat(3), acc.vec(12), acc.mat(15));
        dpsi.transpose() * u + du.transpose() * psi
    }

    pub fn jet(&self, x: &Vec3) -> FieldJet {
        let mut acc = Accumulator::<78>::new(self.mode);
        for (p, xi) in self.positions.iter().zip(self.vectors) {
            let (v, g, h, t) = self.kernel.jet(&(x - p));
            acc.add_vec(0, &(xi * v));
            acc.add_mat(3, &(xi * g.transpose()));
            for k in 0..3 {
                acc.add_mat(12 + 9 * k, &(h * xi[k]));
            }
            acc.add_vec(39, &g.cross(xi));
            acc.add_mat(42, &cross_columns(&h, xi));
            // d2u[k][(i, j)] = (T_{ij·} × ξ)_k
            let mut d2u = [Mat3::zeros(); 3];
            for i in 0..3 {
                for j in 0..3 {
                    let tij = Vec3::new(t[i][(j, 0)], t[i][(j, 1)], t[i][(j, 2)]);
                    let c = tij.cross(xi);
                    for k in 0..3 {
                        d2u[k][(i, j)] = c[k];
                    }
                }
            }
            for (k, m) in d2u.iter().enumerate() {
                acc.add_mat(51 + 9 * k, m);
            }
        }
        FieldJet {
            psi: acc.vec(0),
            dpsi: acc.mat(3),
            d2psi: [acc.mat(12), acc.mat(21), acc.mat(30)],
            u: acc.vec(39),
            du: acc.mat(42),
            d2u: [acc.mat(51), acc.mat(60), acc.mat(69)],
        }
    }

    pub fn velocities_at(&self, targets: &[Vec3]) -> Vec<Vec3> {
        targets.par_iter().map(|x| self.velocity(x)).collect()
    }

    pub fn velocities_and_gradients_at(&self, targets: &[Vec3]) -> Vec<(Vec3, Mat3)> {
        targets
            .par_iter()
            .map(|x| self.velocity_and_gradient(x))
            .collect()
    }

    /// Contribution of the ordered pair `(α, β)` to the double sum.
    pub fn pair_energy(&self, a: usize, b: usize) -> f64 {
        0.5 * self.kernel.value(&(self.positions[a] - self.positions[b]))
            * self.vectors[a].dot(&self.vectors[b])
    }

    pub fn energy(&self) -> EnergyBreakdown {
        let n = self.positions.len();
        let phi0 = self.kernel.value(&Vec3::zeros());
        let rows: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|a| {
                let xa = self.positions[a];
                let va = self.vectors[a];
                let mut acc = Accumulator::<1>::new(self.mode);
                for b in a + 1..n {
                    acc.add(0, self.kernel.value(&(xa - self.positions[b])) * va.dot(&self.vectors[b]));
                }
                (0.5 * phi0 * va.norm_squared(), acc.get(0))
            })
            .collect();
        let mut acc = Accumulator::<2>::new(self.mode);
        for (s, i) in rows {
            acc.add(0, s);
            acc.add(1, i);
        }
        let self_part = acc.get(0);
        let interaction = acc.get(1);
        EnergyBreakdown {
            total: self_part + interaction,
            self_part,
            interaction,
        }
    }
}

/// Column `i` of the result is `h[:, i] × ξ`, i.e. `∂_i (∇φ ∧ ξ)`.
#[inline]
pub fn cross_columns(h: &Mat3, xi: &Vec3) -> Mat3 {
    let c0 = h.column(0).cross(xi);
    let c1 = h.column(1).cross(xi);
    let c2 = h.column(2).cross(xi);
    Mat3::from_columns(&[c0, c1, c2])
}

/// Energy split into diagonal (`α = β`) and off-diagonal parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub self_part: f64,
    pub interaction: f64,
}

pub fn velocity(kernel: &Kernel, set: &SegmentSet, x: &Vec3) -> Vec3 {
    Field::new(kernel, set).velocity(x)
}

pub fn velocity_gradient(kernel: &Kernel, set: &SegmentSet, x: &Vec3) -> Mat3 {
    Field::new(kernel, set).velocity_gradient(x)
}

pub fn psi_field(kernel: &Kernel, set: &SegmentSet, x: &Vec3) -> Vec3 {
    Field::new(kernel, set).psi(x)
}

pub fn phi_aux(kernel: &Kernel, set: &SegmentSet, x: &Vec3) -> f64 {
    Field::new(kernel, set).phi_aux(x)
}

pub fn energy(kernel: &Kernel, set: &SegmentSet) -> EnergyBreakdown {
    Field::new(kernel, set).energy()
}

/// `B_n = M_n^{1/2} H^{1/2} / (2π^{3/2})` bounding `‖∇ⁿu‖_∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityBounds {
    pub b: [f64; 3],
}

pub fn velocity_bounds(moments: &SpectralMoments, energy: f64) -> VelocityBounds {
    let h = energy.max(0.0).sqrt();
    VelocityBounds {
        b: [0, 1, 2].map(|n| moments.velocity_constant(n) * h),
    }
}

/// Bound on `‖∇ⁿΨ‖_∞`: `(∫|k|^{2n} φ̂)^{1/2} H^{1/2} / (2π^{3/2})`.
pub fn psi_bound(moments: &SpectralMoments, energy: f64, n: usize) -> f64 {
    moments.psi_constant(n) * energy.max(0.0).sqrt()
}

/// `1 / (2π^{3/2})`.
pub fn bound_prefactor() -> f64 {
    1.0 / (2.0 * PI.powf(1.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosen() -> Kernel {
        Kernel::rosenhead(1.0, 0.5).unwrap()
    }

    #[test]
    fn single_blob_is_quiet_at_its_centre() {
        let set = SegmentSet::open(vec![Vec3::zeros()], vec![Vec3::new(0.3, -1.0, 2.0)]).unwrap();
        assert_eq!(velocity(&rosen(), &set, &Vec3::zeros()), Vec3::zeros());
    }

    #[test]
    fn single_blob_psi_and_phi() {
        let k = Kernel::rosenhead(4.0 * PI, 1.0).unwrap();
        let x1 = Vec3::new(0.2, 0.1, -0.3);
        let set = SegmentSet::open(vec![x1], vec![Vec3::z()]).unwrap();
        let psi = psi_field(&k, &set, &x1);
        assert!((psi - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
        assert_eq!(phi_aux(&k, &set, &x1), 0.0);
    }

    #[test]
    fn energy_small_cases() {
        let k = Kernel::rosenhead(4.0 * PI, 1.0).unwrap();
        let zero = SegmentSet::open(vec![Vec3::zeros(), Vec3::x()], vec![Vec3::zeros(); 2]).unwrap();
        assert_eq!(energy(&k, &zero).total, 0.0);
        let one = SegmentSet::open(vec![Vec3::zeros()], vec![Vec3::new(0.0, 0.0, 2.0)]).unwrap();
        assert!((energy(&k, &one).total - 2.0).abs() < 1e-14);
        let two = SegmentSet::open(
            vec![Vec3::zeros(), Vec3::x()],
            vec![Vec3::y(), -Vec3::y()],
        )
        .unwrap();
        // ½(1 + 1) − 2·½·2^{-1/2}
        let want = 1.0 - 2f64.powf(-0.5);
        assert!((energy(&k, &two).total - want).abs() < 1e-14);
    }

    #[test]
    fn psi_is_linear_in_vectors() {
        let set = SegmentSet::open(
            vec![Vec3::new(0.1, 0.2, 0.3), Vec3::new(-0.4, 0.0, 0.9)],
            vec![Vec3::new(1.0, 0.5, -0.25), Vec3::new(0.0, 2.0, 1.0)],
        )
        .unwrap();
        let x = Vec3::new(0.7, -0.3, 0.2);
        let a = psi_field(&rosen(), &set, &x);
        let b = psi_field(&rosen(), &set.scaled_vectors(2.0), &x);
        assert_eq!(b, a * 2.0);
    }

    #[test]
    fn closed_set_segments_sum_to_zero() {
        let nodes = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
        ];
        let set = SegmentSet::closed(nodes).unwrap();
        let s: Vec3 = set.vectors().iter().sum();
        assert_eq!(s, Vec3::zeros());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SegmentSet::open(vec![], vec![]).is_err());
        assert!(SegmentSet::open(vec![Vec3::zeros()], vec![]).is_err());
        assert!(SegmentSet::closed(vec![Vec3::new(f64::NAN, 0.0, 0.0)]).is_err());
    }

    #[test]
    fn jet_is_consistent_with_direct_evaluations() {
        let set = SegmentSet::open(
            vec![Vec3::new(0.1, 0.2, 0.3), Vec3::new(-0.4, 0.0, 0.9), Vec3::new(0.5, -0.5, 0.0)],
            vec![Vec3::new(1.0, 0.5, -0.25), Vec3::new(0.0, 2.0, 1.0), Vec3::new(-1.0, 0.0, 0.3)],
        )
        .unwrap();
        let k = rosen();
        let f = Field::new(&k, &set);
        let x = Vec3::new(0.3, 0.1, 0.4);
        let jet = f.jet(&x);
        assert!((jet.u - f.velocity(&x)).norm() < 1e-14);
        assert!((jet.du - f.velocity_gradient(&x)).norm() < 1e-13);
        assert!((jet.phi() - f.phi_aux(&x)).abs() < 1e-14);
        assert!((jet.grad_phi() - f.grad_phi(&x)).norm() < 1e-13);
        // Hessian of Φ by central differences of ∇Φ
        let h = 1e-5;
        let fd = Mat3::from_fn(|i, j| {
            let mut e = Vec3::zeros();
            e[j] = h;
            (f.grad_phi(&(x + e))[i] - f.grad_phi(&(x - e))[i]) / (2.0 * h)
        });
        assert!((jet.hess_phi() - fd).norm() < 1e-6 * fd.norm());
        // ∇²u by central differences of ∇u
        for i in 0..3 {
            let mut e = Vec3::zeros();
            e[i] = h;
            let d = (f.velocity_gradient(&(x + e)) - f.velocity_gradient(&(x - e))) / (2.0 * h);
            for k in 0..3 {
                for j in 0..3 {
                    assert!((jet.d2u[k][(i, j)] - d[(k, j)]).abs() < 1e-6);
                }
            }
        }
    }
}
