//! Constants in the a-priori estimates for energy, length and quadratic
//! variation, assembled from spectral moments.
//!
//! With `C_n` bounding `‖∇ⁿu‖_∞ / H^{1/2}` and `Cψ_n` bounding
//! `‖∇ⁿΨ‖_∞ / H^{1/2}` (note `Cψ_{n+1} = C_n`):
//!
//! * filament: `|dH/dt| ≤ c₁ H A`, with `c₁ = Cψ₀C₂ + 3/2 C₀C₁`
//! * blobs: `|dH/dt| ≤ c₅ H L`, with `c₅ = C₀² + Cψ₀C₁`
//! * both: `|dA/dt| ≤ c₆ H^{1/2} A` and `|dL/dt| ≤ c₇ H^{1/2} L`,
//!   with `c₆ = 2C₁` and `c₇ = C₁`.

use serde::Serialize;

use crate::kernel::SpectralMoments;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub c1: f64,
    /// Coefficient of `H^{1/2} A`; every term of the filament rate is
    /// already of order `H A`, so this is zero.
    pub c2: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
}

impl BoundConstants {
    pub fn from_moments(m: &SpectralMoments) -> Self {
        let c = |n| m.velocity_constant(n);
        let cpsi0 = m.psi_constant(0);
        BoundConstants {
            c1: cpsi0 * c(2) + 1.5 * c(0) * c(1),
            c2: 0.0,
            c5: c(0) * c(0) + cpsi0 * c(1),
            c6: 2.0 * c(1),
            c7: c(1),
        }
    }

    /// Bound on `|dH/dt|` for a filament.
    pub fn filament_rate(&self, energy: f64, a: f64) -> f64 {
        let h = energy.max(0.0);
        self.c1 * h * a + self.c2 * h.sqrt() * a
    }

    /// Bound on `|dH/dt|` for a blob system.
    pub fn blob_rate(&self, energy: f64, l: f64) -> f64 {
        self.c5 * energy.max(0.0) * l
    }

    pub fn length_rate(&self, energy: f64, l: f64) -> f64 {
        self.c7 * energy.max(0.0).sqrt() * l
    }

    pub fn variation_rate(&self, energy: f64, a: f64) -> f64 {
        self.c6 * energy.max(0.0).sqrt() * a
    }

    /// Exponent rate in `H(t) ≤ H(0) e^{r t}` while `A ≤ a_max`.
    pub fn energy_growth_rate(&self, a_max: f64) -> f64 {
        self.c1.max(self.c2) * a_max
    }
}

/// `L(0) exp(c₇ H_max^{1/2} t)`.
pub fn gronwall_length(l0: f64, c7: f64, h_max: f64, t: f64) -> f64 {
    l0 * (c7 * h_max.max(0.0).sqrt() * t).exp()
}
