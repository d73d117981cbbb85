//! Midpoint refinement of filaments, either uniformly until the quadratic
//! variation falls below a target or locally where `J_β` is largest.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VortexError};
use crate::filament::{Filament, RateOptions};
use crate::kernel::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineMode {
    Uniform,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefinePolicy {
    /// Refinement is triggered when `A > a_max`.
    pub a_max: f64,
    /// Refinement continues until `A ≤ a_target`.
    pub a_target: f64,
    pub mode: RefineMode,
    /// Fraction of segments split by one local pass.
    pub local_fraction: f64,
    pub max_points: usize,
}

impl Default for RefinePolicy {
    fn default() -> Self {
        RefinePolicy {
            a_max: 1.0,
            a_target: 0.5,
            mode: RefineMode::Uniform,
            local_fraction: 0.1,
            max_points: 100_000,
        }
    }
}

impl RefinePolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_target > 0.0 && self.a_target < self.a_max && self.a_max.is_finite()) {
            return Err(VortexError::invalid(
                "a_target",
                format!("need 0 < a_target < a_max, got {} and {}", self.a_target, self.a_max),
            ));
        }
        if !(self.local_fraction > 0.0 && self.local_fraction <= 1.0) {
            return Err(VortexError::invalid(
                "local_fraction",
                format!("must lie in (0, 1], got {}", self.local_fraction),
            ));
        }
        if self.max_points < 3 {
            return Err(VortexError::invalid("max_points", "must be at least 3"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineReport {
    pub n_before: usize,
    pub n_after: usize,
    pub passes: usize,
    /// Indices (in the filament before refinement) of split segments,
    /// collected over all passes of a local refinement in pass order.
    pub split: Vec<usize>,
    pub a_before: f64,
    pub a_after: f64,
    pub l_before: f64,
    pub l_after: f64,
    pub h_before: f64,
    pub h_after: f64,
    /// `J_β` of the last local pass.
    pub scores: Option<Vec<f64>>,
}

/// Inserts the midpoint of every segment whose flag is set.
pub fn split_segments(nodes: &[Vec3], flags: &[bool]) -> Vec<Vec3> {
    let n = nodes.len();
    let mut out = Vec::with_capacity(n + flags.iter().filter(|f| **f).count());
    for a in 0..n {
        out.push(nodes[a]);
        if flags[a] {
            out.push((nodes[a] + nodes[(a + 1) % n]) * 0.5);
        }
    }
    out
}

/// Per-segment `J_β = ⟨Ψ(x_β), Θ̃_β ξ_β⊗ξ_β⟩ − ⟨ξ_β, Θ_β ξ_β⟩`.
pub fn instability_scores(filament: &Filament, opts: &RateOptions) -> Result<Vec<f64>> {
    Ok(filament.energy_rate(opts)?.scores)
}

/// Indices of the `⌈q N⌉` largest scores; ties go to the lower index.
pub fn select_largest(scores: &[f64], fraction: f64) -> Vec<usize> {
    let n = scores.len();
    let count = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(count);
    idx.sort_unstable();
    idx
}

fn report(before: &Filament, after: &Filament, passes: usize, split: Vec<usize>, scores: Option<Vec<f64>>) -> RefineReport {
    let fb = before.functionals();
    let fa = if passes == 0 { fb } else { after.functionals() };
    RefineReport {
        n_before: before.len(),
        n_after: after.len(),
        passes,
        split,
        a_before: fb.variation,
        a_after: fa.variation,
        l_before: fb.length,
        l_after: fa.length,
        h_before: fb.energy,
        h_after: fa.energy,
        scores,
    }
}

/// Repeated uniform midpoint passes until `A ≤ a_target`; the identity
/// when `A ≤ a_max`.
pub fn refine_uniform(filament: &Filament, policy: &RefinePolicy) -> Result<(Filament, RefineReport)> {
    policy.validate()?;
    if filament.variation() <= policy.a_max {
        return Ok((filament.clone(), report(filament, filament, 0, Vec::new(), None)));
    }
    let mut current = filament.clone();
    let mut passes = 0;
    while current.variation() > policy.a_target {
        let needed = 2 * current.len();
        if needed > policy.max_points {
            return Err(VortexError::MaxPointsExceeded {
                needed,
                cap: policy.max_points,
            });
        }
        let flags = vec![true; current.len()];
        current = current.with_nodes(split_segments(current.nodes(), &flags))?;
        passes += 1;
    }
    let split = (0..filament.len()).collect();
    Ok((current.clone(), report(filament, &current, passes, split, None)))
}

/// One local pass: splits the `⌈qN⌉` segments with the largest `J_β`.
pub fn refine_local_pass(
    filament: &Filament,
    policy: &RefinePolicy,
    opts: &RateOptions,
) -> Result<(Filament, Vec<usize>, Vec<f64>)> {
    policy.validate()?;
    let scores = instability_scores(filament, opts)?;
    let chosen = select_largest(&scores, policy.local_fraction);
    let needed = filament.len() + chosen.len();
    if needed > policy.max_points {
        return Err(VortexError::MaxPointsExceeded {
            needed,
            cap: policy.max_points,
        });
    }
    let mut flags = vec![false; filament.len()];
    for &i in &chosen {
        flags[i] = true;
    }
    let refined = filament.with_nodes(split_segments(filament.nodes(), &flags))?;
    Ok((refined, chosen, scores))
}

/// A single local pass, regardless of `A`.
pub fn refine_local(filament: &Filament, policy: &RefinePolicy, opts: &RateOptions) -> Result<(Filament, RefineReport)> {
    let (refined, chosen, scores) = refine_local_pass(filament, policy, opts)?;
    let rep = report(filament, &refined, 1, chosen, Some(scores));
    Ok((refined, rep))
}

/// Applies the policy when `A > a_max`: uniform passes, or local passes
/// repeated until `A ≤ a_target`.
pub fn refine(filament: &Filament, policy: &RefinePolicy, opts: &RateOptions) -> Result<(Filament, RefineReport)> {
    match policy.mode {
        RefineMode::Uniform => refine_uniform(filament, policy),
        RefineMode::Local => {
            policy.validate()?;
            if filament.variation() <= policy.a_max {
                return Ok((filament.clone(), report(filament, filament, 0, Vec::new(), None)));
            }
            let mut current = filament.clone();
            let mut passes = 0;
            let mut last_scores = None;
            let mut split = Vec::new();
            while current.variation() > policy.a_target {
                let (next, chosen, scores) = refine_local_pass(&current, policy, opts)?;
                current = next;
                passes += 1;
                split.extend(chosen);
                last_scores = Some(scores);
            }
            Ok((current.clone(), report(filament, &current, passes, split, last_scores)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Kernel;

    fn square(side: f64) -> Filament {
        let nodes = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(side, 0.0, 0.0),
            Vec3::new(side, side, 0.0),
            Vec3::new(0.0, side, 0.0),
        ];
        Filament::new(nodes, Kernel::rosenhead(1.0, 0.5).unwrap()).unwrap()
    }

    #[test]
    fn unit_square_uniform_pass() {
        let f = square(1.0);
        let flags = vec![true; 4];
        let g = f.with_nodes(split_segments(f.nodes(), &flags)).unwrap();
        assert_eq!(g.length(), 4.0);
        assert_eq!(g.variation(), 2.0);
    }

    #[test]
    fn two_passes_from_a_equal_to_one_point_two() {
        // four sides of squared length 0.3 each
        let f = square(0.3f64.sqrt());
        let a0 = f.variation();
        assert!((a0 - 1.2).abs() < 1e-14);
        let (g, r) = refine_uniform(&f, &RefinePolicy::default()).unwrap();
        assert_eq!(r.passes, 2);
        assert_eq!(g.len(), 16);
        assert!((r.a_after - 0.3).abs() < 1e-14);
    }

    #[test]
    fn below_trigger_is_identity() {
        let f = square(0.9f64.sqrt() / 2.0);
        let (g, r) = refine_uniform(&f, &RefinePolicy::default()).unwrap();
        assert_eq!(g.nodes(), f.nodes());
        assert_eq!(r.passes, 0);
    }

    #[test]
    fn cap_is_enforced() {
        let f = square(3.0);
        let policy = RefinePolicy {
            max_points: 20,
            ..RefinePolicy::default()
        };
        assert!(matches!(
            refine_uniform(&f, &policy),
            Err(VortexError::MaxPointsExceeded { .. })
        ));
    }

    #[test]
    fn ties_go_to_lower_index() {
        assert_eq!(select_largest(&[1.0; 8], 0.25), vec![0, 1]);
        assert_eq!(select_largest(&[0.0, 2.0, 1.0, 2.0], 0.5), vec![1, 3]);
        assert_eq!(select_largest(&[3.0, 1.0, 2.0], 1.0), vec![0, 1, 2]);
    }

    #[test]
    fn invalid_policy_is_rejected() {
        let p = RefinePolicy {
            a_target: 2.0,
            ..RefinePolicy::default()
        };
        assert!(p.validate().is_err());
        let p = RefinePolicy {
            local_fraction: 0.0,
            ..RefinePolicy::default()
        };
        assert!(p.validate().is_err());
    }
}
