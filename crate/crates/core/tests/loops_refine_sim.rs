use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vortex_core::error::VortexError;
use vortex_core::filament::{Filament, RateOptions};
use vortex_core::kernel::{Kernel, Vec3};
use vortex_core::loops::{make_bump_kernel, wrap_point, Generator, LatticeKernel, LoopSystem};
use vortex_core::refine::{
    instability_scores, refine, refine_local, refine_uniform, select_largest, split_segments, RefineMode,
    RefinePolicy,
};
use vortex_core::scenario::{blob_cloud, circle, perturbed_circle};
use vortex_core::sim::{run, step, IntegratorSpec, RunSpec, Scheme, State};

fn kernel8() -> Arc<LatticeKernel> {
    Arc::new(make_bump_kernel(&Generator::Gaussian { width: 1.0 }, 8, 1e-10).unwrap())
}

fn rand_vec(r: &mut ChaCha8Rng, scale: f64) -> Vec3 {
    Vec3::new(
        r.random_range(-scale..scale),
        r.random_range(-scale..scale),
        r.random_range(-scale..scale),
    )
}

fn random_loops(n: usize, strength: f64, seed: u64) -> LoopSystem {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let pos = (0..n).map(|_| rand_vec(&mut r, PI)).collect();
    let mom = (0..n).map(|_| rand_vec(&mut r, strength)).collect();
    LoopSystem::new(pos, mom, kernel8()).unwrap()
}

fn rosen() -> Kernel {
    Kernel::rosenhead(1.0, 0.5).unwrap()
}

fn lattice_sum(cutoff: i32, f: impl Fn(Vec3) -> f64) -> f64 {
    let mut s = 0.0;
    for a in -cutoff..=cutoff {
        for b in -cutoff..=cutoff {
            for c in -cutoff..=cutoff {
                if (a, b, c) != (0, 0, 0) {
                    s += f(Vec3::new(a as f64, b as f64, c as f64));
                }
            }
        }
    }
    s
}

#[test]
fn gaussian_bump_tail_beyond_eight_is_negligible() {
    let rho = |k: Vec3| (-0.5 * k.norm_squared()).exp();
    let kept = lattice_sum(8, |k| k.norm_squared().powi(2) * rho(k));
    let all = lattice_sum(16, |k| k.norm_squared().powi(2) * rho(k));
    assert!((all - kept) / all < 1e-10);
    let k = kernel8();
    assert!((k.moment(4) - kept).abs() <= 1e-12 * kept);
    assert!(make_bump_kernel(&Generator::Gaussian { width: 1.0 }, 4, 1e-10).is_err());
}

#[test]
fn zero_moments_give_zero_velocity() {
    let s = LoopSystem::new(vec![Vec3::new(0.3, 1.0, -2.0); 3], vec![Vec3::zeros(); 3], kernel8()).unwrap();
    let (xd, md) = s.rhs();
    assert!(xd.iter().chain(&md).all(|v| *v == Vec3::zeros()));
    assert_eq!(s.energy(), 0.0);
}

#[test]
fn single_loop_moves_along_its_moment() {
    let m = Vec3::new(0.3, -0.5, 0.8);
    let x = Vec3::new(0.4, 1.2, -2.2);
    let s = LoopSystem::new(vec![x], vec![m], kernel8()).unwrap();
    let (u, du) = s.velocity_and_gradient(&x);
    assert!(du.iter().all(|v| v.abs() <= 1e-15), "{du}");
    let sum = lattice_sum(8, |k| (-0.5 * k.norm_squared()).exp());
    let expected = m * (2.0 * sum / 3.0) / (2.0 * PI).powi(3);
    assert!((u - expected).norm() <= 1e-12 * expected.norm());
    let (xd, md) = s.rhs();
    assert_eq!(xd[0], u);
    assert!(md[0].norm() <= 1e-15);
}

#[test]
fn single_loop_energy_matches_a_lattice_sum() {
    let m = Vec3::new(0.0, 0.0, 1.0);
    let s = LoopSystem::new(vec![Vec3::new(1.0, 2.0, 3.0)], vec![m], kernel8()).unwrap();
    let oracle = 0.5 / (2.0 * PI).powi(3)
        * lattice_sum(8, |k| (-0.5 * k.norm_squared()).exp() * (1.0 - k.z * k.z / k.norm_squared()));
    assert!((s.energy() - oracle).abs() <= 1e-13 * oracle);
}

#[test]
fn energy_is_translation_invariant_and_quadratic() {
    let s = random_loops(5, 1.0, 21);
    let h = s.energy();
    let shift = Vec3::new(0.9, -2.1, 1.7);
    let moved = s.with_state(s.positions().iter().map(|x| wrap_point(&(x + shift))).collect(), s.moments().to_vec());
    assert!((moved.unwrap().energy() - h).abs() <= 1e-12 * h);
    let doubled = s.with_state(s.positions().to_vec(), s.moments().iter().map(|m| m * 2.0).collect()).unwrap();
    assert_eq!(doubled.energy(), 4.0 * h);
    let tripled = s.with_state(s.positions().to_vec(), s.moments().iter().map(|m| m * 3.0).collect()).unwrap();
    assert!((tripled.energy() - 9.0 * h).abs() <= 1e-14 * h);
}

#[test]
fn loop_energy_is_conserved_along_the_flow() {
    let s = random_loops(4, 1.0, 5);
    let (xd, md) = s.rhs();
    let h = |d: f64| {
        s.with_state(
            s.positions().iter().zip(&xd).map(|(x, v)| x + v * d).collect(),
            s.moments().iter().zip(&md).map(|(m, v)| m + v * d).collect(),
        )
        .unwrap()
        .energy()
    };
    let fd = (h(1e-4) - h(-1e-4)) / 2e-4;
    assert!(fd.abs() <= 1e-8 * s.energy(), "{fd}");
}

#[test]
fn sampled_loop_fields_respect_the_derivative_bounds() {
    let s = random_loops(6, 1.0, 77);
    let k = s.kernel();
    let root_h = s.energy().sqrt();
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let mut worst = [0.0f64; 4];
    for _ in 0..400 {
        let (u, du, d2u) = s.jet(&rand_vec(&mut r, PI));
        let d2 = d2u.iter().flat_map(|m| m.iter()).map(|v| v * v).sum::<f64>().sqrt();
        let parts = [u.norm(), du.norm(), d2];
        for n in 0..3 {
            worst[n] = worst[n].max(parts[n] / (k.derivative_constant(n as i32) * root_h));
        }
        worst[3] = worst[3].max(parts.iter().sum::<f64>() / (k.decay_constant() * root_h));
    }
    assert!(worst[..3].iter().all(|&w| w <= 1.0), "{worst:?}");
    // Combined sup against the fourth-moment constant alone: observed, not proven.
    assert!(worst[3] <= 1.0, "{worst:?}");
}

fn scaled_square(side: f64) -> Vec<Vec3> {
    vec![
        Vec3::zeros(),
        Vec3::new(side, 0.0, 0.0),
        Vec3::new(side, side, 0.0),
        Vec3::new(0.0, side, 0.0),
    ]
}

#[test]
fn uniform_refinement_passes() {
    let policy = RefinePolicy::default();
    let f = Filament::new(scaled_square(0.3f64.sqrt()), rosen()).unwrap();
    assert!((f.variation() - 1.2).abs() < 1e-12);
    let (g, rep) = refine_uniform(&f, &policy).unwrap();
    assert_eq!((rep.passes, g.len()), (2, 16));
    assert!((g.variation() - 0.3).abs() < 1e-12);
    assert!((g.length() - f.length()).abs() < 1e-14);

    let small = Filament::new(scaled_square(0.9f64.sqrt() / 2.0), rosen()).unwrap();
    let (h, rep) = refine_uniform(&small, &policy).unwrap();
    assert_eq!(rep.passes, 0);
    assert_eq!(h.nodes(), small.nodes());

    let unit = Filament::new(scaled_square(1.0), rosen()).unwrap();
    let split = unit.with_nodes(split_segments(unit.nodes(), &[true; 4])).unwrap();
    assert_eq!((split.length(), split.variation()), (4.0, 2.0));
}

#[test]
fn degenerate_segment_scores_zero() {
    let mut nodes = perturbed_circle(1.0, 12, 0.2, 3, 3).unwrap();
    nodes.insert(5, nodes[4]);
    let f = Filament::new(nodes, rosen()).unwrap();
    let scores = instability_scores(&f, &RateOptions::default()).unwrap();
    assert_eq!(scores[4], 0.0);
}

#[test]
fn planar_circle_scores_all_vanish() {
    let f = Filament::new(circle(1.0, 32, Vec3::zeros(), Vec3::z()).unwrap(), rosen()).unwrap();
    let rate = f.energy_rate(&RateOptions::default()).unwrap();
    assert!(rate.scores.iter().all(|s| s.abs() <= 1e-15 * rate.phi_scale), "{:?}", rate.scores);
}

#[test]
fn pinched_node_carries_the_largest_score() {
    let mut nodes = perturbed_circle(1.0, 32, 0.3, 3, 1).unwrap();
    nodes[8] = Vec3::new(nodes[8].x * 0.3, nodes[8].y * 0.3, nodes[8].z + 0.3);
    let f = Filament::new(nodes, rosen()).unwrap();
    let scores = instability_scores(&f, &RateOptions::default()).unwrap();
    assert_eq!(select_largest(&scores, 0.01), vec![7]);
}

#[test]
fn local_pass_with_full_fraction_is_a_uniform_pass() {
    let f = Filament::new(perturbed_circle(1.0, 20, 0.3, 3, 6).unwrap(), rosen()).unwrap();
    let policy = RefinePolicy {
        local_fraction: 1.0,
        ..Default::default()
    };
    let (g, rep) = refine_local(&f, &policy, &RateOptions::default()).unwrap();
    assert_eq!(rep.split, (0..20).collect::<Vec<_>>());
    assert_eq!(g.nodes(), split_segments(f.nodes(), &[true; 20]).as_slice());
}

#[test]
fn ties_go_to_lower_indices() {
    assert_eq!(select_largest(&[1.0; 8], 0.25), vec![0, 1]);
    assert_eq!(select_largest(&[0.0, 3.0, 1.0, 3.0, 2.0], 0.4), vec![1, 3]);
}

#[test]
fn long_segment_dominates_scores_in_magnitude_only() {
    let mut nodes = perturbed_circle(1.0, 32, 0.05, 3, 11).unwrap();
    nodes.drain(5..8);
    let f = Filament::new(nodes, rosen()).unwrap();
    let lengths: Vec<f64> = f.segments().iter().map(|s| s.norm()).collect();
    let long = (0..lengths.len()).max_by(|&a, &b| lengths[a].total_cmp(&lengths[b])).unwrap();
    let scores = instability_scores(&f, &RateOptions::default()).unwrap();
    let magnitudes: Vec<f64> = scores.iter().map(|s| s.abs()).collect();
    assert_eq!(select_largest(&magnitudes, 0.01), vec![long]);
    // Its contribution to dH/dt is negative, so the signed ranking passes it over.
    assert!(scores.iter().all(|&s| s >= scores[long]));
    let policy = RefinePolicy {
        local_fraction: 0.1,
        ..Default::default()
    };
    let (_, rep) = refine_local(&f, &policy, &RateOptions::default()).unwrap();
    assert!(!rep.split.contains(&long));
}

#[test]
fn refinement_energy_change_shrinks_with_resolution() {
    let change = |n: usize| {
        let f = Filament::new(circle(1.0, n, Vec3::zeros(), Vec3::z()).unwrap(), rosen()).unwrap();
        let g = f.with_nodes(split_segments(f.nodes(), &vec![true; n])).unwrap();
        (g.energy().total - f.energy().total).abs() / f.energy().total
    };
    let eps: Vec<f64> = [16, 32, 64].iter().map(|&n| change(n)).collect();
    assert!(eps[0] > eps[1] && eps[1] > eps[2], "{eps:?}");
}

#[test]
fn refinement_respects_the_point_cap() {
    let f = Filament::new(scaled_square(1.0), rosen()).unwrap();
    let policy = RefinePolicy {
        max_points: 6,
        ..Default::default()
    };
    assert!(matches!(refine_uniform(&f, &policy), Err(VortexError::MaxPointsExceeded { needed: 8, cap: 6 })));
    let local = RefinePolicy {
        mode: RefineMode::Local,
        ..policy
    };
    assert!(matches!(refine(&f, &local, &RateOptions::default()), Err(VortexError::MaxPointsExceeded { .. })));

    let spec = RunSpec {
        refine: Some(policy),
        ..RunSpec::new(IntegratorSpec {
            scheme: Scheme::Rk4,
            dt: Some(0.01),
            t_end: 0.1,
            output_stride: 1,
        })
    };
    let trace = run(State::Filament(f), &spec, &mut []);
    assert!(matches!(trace.error, Some(VortexError::MaxPointsExceeded { .. })));
    assert_eq!(trace.steps, 0);
}

#[test]
fn single_blob_is_a_fixed_point() {
    let (pos, vec) = blob_cloud(1, 1.0, 1.0, 2).unwrap();
    let s = State::Blobs(vortex_core::blobs::BlobSystem::new(pos, vec, rosen()).unwrap());
    for scheme in [Scheme::Euler, Scheme::Rk4] {
        let next = step(&s, scheme, 0.1, 0.0).unwrap();
        assert_eq!(next.flatten(), s.flatten());
    }
}

#[test]
fn single_loop_euler_step_is_exact() {
    let x = Vec3::new(0.1, -0.2, 0.3);
    let s = LoopSystem::new(vec![x], vec![Vec3::new(0.2, 0.4, -0.1)], kernel8()).unwrap();
    let u = s.velocity(&x);
    let next = step(&State::Loops(s.clone()), Scheme::Euler, 0.01, 0.0).unwrap();
    let State::Loops(t) = next else { unreachable!() };
    assert!((t.positions()[0] - (x + u * 0.01)).norm() <= 1e-16);
    assert_eq!(t.moments(), s.moments());
}

#[test]
fn rk4_on_loops_is_fourth_order() {
    let s0 = State::Loops(random_loops(3, 20.0, 31));
    let integrate = |dt: f64| {
        let mut s = s0.clone();
        let steps = (1.0 / dt).round() as usize;
        for i in 0..steps {
            s = step(&s, Scheme::Rk4, dt, i as f64 * dt).unwrap();
        }
        s.flatten()
    };
    let reference = integrate(0.005);
    let err = |dt: f64| {
        integrate(dt)
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    };
    let ratio = err(0.1) / err(0.05);
    assert!((12.0..20.0).contains(&ratio), "{ratio}");
}

#[test]
fn implicit_midpoint_is_loops_only() {
    let f = State::Filament(Filament::new(circle(1.0, 8, Vec3::zeros(), Vec3::z()).unwrap(), rosen()).unwrap());
    assert!(step(&f, Scheme::ImplicitMidpoint, 0.01, 0.0).is_err());
    let s = State::Loops(random_loops(3, 5.0, 8));
    let h0 = s.energy();
    let drift = |dt: f64| {
        let mut t = s.clone();
        let mut worst = 0.0f64;
        for i in 0..(1.0 / dt).round() as usize {
            t = step(&t, Scheme::ImplicitMidpoint, dt, i as f64 * dt).unwrap();
            worst = worst.max((t.energy() - h0).abs() / h0);
        }
        worst
    };
    let (coarse, fine) = (drift(0.05), drift(0.025));
    assert!(coarse <= 1e-6, "{coarse}");
    assert!((3.0..5.0).contains(&(coarse / fine)), "{coarse} {fine}");
}

#[test]
fn zero_length_run_emits_one_record() {
    let f = Filament::new(circle(1.0, 16, Vec3::zeros(), Vec3::z()).unwrap(), rosen()).unwrap();
    let spec = RunSpec::new(IntegratorSpec {
        scheme: Scheme::Rk4,
        dt: Some(0.01),
        t_end: 0.0,
        output_stride: 1,
    });
    let trace = run(State::Filament(f), &spec, &mut []);
    assert!(trace.error.is_none());
    assert_eq!(trace.records.len(), 1);
}

#[test]
fn resolved_circle_is_never_refined() {
    let f = Filament::new(circle(1.0, 128, Vec3::zeros(), Vec3::z()).unwrap(), rosen()).unwrap();
    let spec = RunSpec {
        refine: Some(RefinePolicy::default()),
        rate_diagnostics: false,
        ..RunSpec::new(IntegratorSpec {
            scheme: Scheme::Rk4,
            dt: Some(1e-3),
            t_end: 1.0,
            output_stride: 100,
        })
    };
    let trace = run(State::Filament(f), &spec, &mut []);
    assert!(trace.error.is_none());
    assert!(trace.events.is_empty());
    assert_eq!(trace.records.len(), 11);
    assert!(trace.records.windows(2).all(|w| w[1].t > w[0].t));
    assert!(trace.records.iter().all(|r| r.n == 128 && r.refinements == 0));
}
