use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vortex_core::field::{psi_bound, velocity_bounds, Field, SegmentSet};
use vortex_core::kernel::{
    log_grid, tensor_norm, verify_admissibility, Kernel, OscillatoryProbe, SamplingSpec, Vec3,
};
use vortex_core::quadrature::Tolerance;
use vortex_core::scenario::circle;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn rand_vec(r: &mut ChaCha8Rng, scale: f64) -> Vec3 {
    Vec3::new(
        r.random_range(-scale..scale),
        r.random_range(-scale..scale),
        r.random_range(-scale..scale),
    )
}

fn random_set(r: &mut ChaCha8Rng, n: usize) -> SegmentSet {
    let pos = (0..n).map(|_| rand_vec(r, 1.0)).collect();
    let vec = (0..n).map(|_| rand_vec(r, 1.0)).collect();
    SegmentSet::open(pos, vec).unwrap()
}

/// Trapezoid rule on `[a, b]` with `n` intervals.
fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for i in 1..n {
        s += f(a + i as f64 * h);
    }
    s * h
}

#[test]
fn rosenhead_point_values() {
    let k = Kernel::rosenhead(4.0 * PI, 1.0).unwrap();
    assert!((k.value(&Vec3::zeros()) - 1.0).abs() < 1e-15);
    let k = Kernel::rosenhead(8.0 * PI, 1.0).unwrap();
    assert!((k.value(&Vec3::x()) - 2f64.sqrt()).abs() < 1e-14);
    let x = Vec3::new(0.3, -1.2, 0.7);
    assert_eq!(k.value(&x), k.value(&-x));
}

#[test]
fn derivatives_match_finite_differences() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    for k in [Kernel::rosenhead(1.0, 0.5).unwrap(), Kernel::gaussian(2.0, 0.8).unwrap()] {
        for _ in 0..20 {
            let x = rand_vec(&mut r, 2.0);
            let h = 1e-4;
            let mut g = Vec3::zeros();
            let mut hess = k.hessian(&x);
            for i in 0..3 {
                let mut e = Vec3::zeros();
                e[i] = h;
                g[i] = (k.value(&(x + e)) - k.value(&(x - e))) / (2.0 * h);
                let col = (k.gradient(&(x + e)) - k.gradient(&(x - e))) / (2.0 * h);
                for j in 0..3 {
                    hess[(j, i)] -= col[j];
                }
            }
            assert!((k.gradient(&x) - g).norm() <= 1e-6 * g.norm(), "{k:?} at {x:?}");
            assert!(hess.norm() <= 1e-6 * k.hessian(&x).norm(), "{k:?} at {x:?}");
        }
    }
}

/// `M_0` of the Rosenhead kernel with the transform taken from
/// `φ̂(k) = (Γ/4) ∫₀^∞ exp(−k²/(4t) − tμ²) t^{−2} dt`, both integrals by the
/// trapezoid rule in logarithmic variables.
#[test]
fn rosenhead_second_moment_against_nested_quadrature() {
    let (gamma, mu) = (1.0, 1.0);
    let transform = |k: f64| {
        0.25 * gamma
            * trapezoid(
                |s: f64| (-k * k * (-s).exp() / 4.0 - mu * mu * s.exp() - s).exp(),
                -40.0,
                12.0,
                2600,
            )
    };
    let m0 = 4.0 * PI * trapezoid(|q: f64| (5.0 * q).exp() * transform(q.exp()), -14.0, 5.5, 1000);
    let lib = Kernel::rosenhead(gamma, mu)
        .unwrap()
        .spectral_moments(Tolerance::default())
        .unwrap();
    assert!(rel(lib.m(0), m0) <= 1e-5, "{} vs {m0}", lib.m(0));
}

#[test]
fn moments_scale_with_gamma_and_mu() {
    let tol = Tolerance { abs: 0.0, rel: 1e-11 };
    let one = Kernel::rosenhead(1.0, 1.0).unwrap().spectral_moments(tol).unwrap();
    let two = Kernel::rosenhead(2.0, 1.0).unwrap().spectral_moments(tol).unwrap();
    for n in 0..3 {
        assert!(rel(two.m(n), 2.0 * one.m(n)) < 1e-10);
    }
    // φ_μ(x) = φ_1(x/μ)/μ gives φ̂_μ(k) = μ² φ̂_1(μk) and M_n(μ) = μ^{−(2n+3)} M_n(1).
    for mu in [0.5f64, 2.0] {
        let m = Kernel::rosenhead(1.0, mu).unwrap().spectral_moments(tol).unwrap();
        for n in 0..3 {
            let want = mu.powi(-(2 * n as i32 + 3)) * one.m(n);
            assert!(rel(m.m(n), want) < 1e-8, "mu={mu} n={n}");
        }
    }
}

#[test]
fn rosenhead_transform_is_positive_and_decreasing() {
    let k = Kernel::rosenhead(1.0, 0.5).unwrap();
    let vals: Vec<f64> = log_grid(1e-2, 1e2, 200).into_iter().map(|q| k.fourier_radial(q)).collect();
    assert!(vals.iter().all(|&v| v > 0.0));
    assert!(vals.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn admissibility_reports() {
    let spec = SamplingSpec::default();
    assert!(verify_admissibility(&Kernel::rosenhead(1.0, 0.5).unwrap(), &spec).all_passed());
    assert!(verify_admissibility(&Kernel::gaussian(1.0, 1.0).unwrap(), &spec).all_passed());
    let probe = Kernel::custom(Arc::new(OscillatoryProbe::new(1.0, 4.0, 1.0).unwrap()));
    let rep = verify_admissibility(&probe, &spec);
    assert_eq!(rep.failed_ids(), vec!["A.2"], "{rep}");
}

/// The A.2 verdict for `cos(|x|) exp(−|x|²)` agrees with the sign of its
/// transform `(4π/k) ∫ r sin(kr) φ(r) dr` computed by quadrature.
#[test]
fn probe_verdict_matches_numeric_transform() {
    let sigma = 0.5f64.sqrt();
    let probe = OscillatoryProbe::new(1.0, 1.0, sigma).unwrap();
    let spec = SamplingSpec::default();
    let samples: Vec<f64> = spec
        .wavenumbers
        .iter()
        .map(|&k| {
            4.0 * PI / k
                * trapezoid(|r: f64| r * (k * r).sin() * r.cos() * (-r * r).exp(), 0.0, 12.0, 60_000)
        })
        .collect();
    let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = samples.iter().cloned().fold(0.0, f64::max);
    let rep = verify_admissibility(&Kernel::custom(Arc::new(probe)), &spec);
    let a2 = rep.conditions.iter().find(|c| c.id == "A.2").unwrap();
    // values within quadrature noise of zero count as non-negative
    assert_eq!(a2.passed, min >= -1e-12 * max, "oracle min {min}, report {rep}");
}

#[test]
fn ngon_centre_velocity() {
    let (mu, n) = (0.5, 64);
    let k = Kernel::rosenhead(1.0, mu).unwrap();
    let set = SegmentSet::closed(circle(1.0, n, Vec3::zeros(), Vec3::z()).unwrap()).unwrap();
    let u = Field::new(&k, &set).velocity(&Vec3::zeros());
    assert!(u.x.abs() <= 1e-13 && u.y.abs() <= 1e-13);
    // All nodes are equidistant from the centre, so u = (Γ/4π)(1+μ²)^{-3/2} Σ x_β × x_{β+1}.
    let s = (1.0 + mu * mu).powf(-1.5) / (4.0 * PI);
    let polygon = s * n as f64 * (2.0 * PI / n as f64).sin();
    assert!(rel(u.z, polygon) < 1e-13);
    let continuum = trapezoid(
        |t: f64| {
            let y = Vec3::new(t.cos(), t.sin(), 0.0);
            let dy = Vec3::new(-t.sin(), t.cos(), 0.0);
            (y * s).cross(&dy).z
        },
        0.0,
        2.0 * PI,
        10_000,
    );
    let h = 2.0 * PI / n as f64;
    assert!(rel(u.z, continuum) <= h * h / 6.0 * 1.01);
}

#[test]
fn far_field_is_small() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let set = random_set(&mut r, 10);
    let k = Kernel::rosenhead(1.0, 0.5).unwrap();
    let l: f64 = set.vectors().iter().map(|v| v.norm()).sum();
    let x = Vec3::new(60.0, -60.0, 52.0).normalize() * 100.0;
    let u = Field::new(&k, &set).velocity(&x);
    let grad_sup = k.gradient(&(x * 0.98)).norm();
    assert!(u.norm() <= grad_sup * l);
    assert!(u.norm() < 1e-4);
}

#[test]
fn single_blob_gradient_is_antisymmetric() {
    let k = Kernel::gaussian(1.0, 0.7).unwrap();
    let xi = Vec3::new(0.3, -0.5, 0.8);
    let set = SegmentSet::open(vec![Vec3::zeros()], vec![xi]).unwrap();
    let du = Field::new(&k, &set).velocity_gradient(&Vec3::zeros());
    assert!((du + du.transpose()).norm() < 1e-15);
    assert!(xi.dot(&(du.transpose() * xi)).abs() < 1e-16);
}

#[test]
fn single_blob_psi() {
    let k = Kernel::rosenhead(4.0 * PI, 1.0).unwrap();
    let x1 = Vec3::new(0.2, 0.4, -1.0);
    let set = SegmentSet::open(vec![x1], vec![Vec3::z()]).unwrap();
    let f = Field::new(&k, &set);
    assert_eq!(f.psi(&x1), Vec3::new(0.0, 0.0, 1.0));
    assert_eq!(f.phi_aux(&x1), 0.0);
}

#[test]
fn energy_examples() {
    let k = Kernel::rosenhead(4.0 * PI, 1.0).unwrap();
    let one = SegmentSet::open(vec![Vec3::zeros()], vec![Vec3::new(0.0, 0.0, 2.0)]).unwrap();
    assert!((Field::new(&k, &one).energy().total - 2.0).abs() < 1e-15);
    let two = SegmentSet::open(vec![Vec3::zeros(), Vec3::x()], vec![Vec3::y(), -Vec3::y()]).unwrap();
    assert!((Field::new(&k, &two).energy().total - (1.0 - 0.5f64.sqrt())).abs() < 1e-15);
    let zero = SegmentSet::open(vec![Vec3::zeros(), Vec3::x()], vec![Vec3::zeros(); 2]).unwrap();
    assert_eq!(Field::new(&k, &zero).energy().total, 0.0);
}

#[test]
fn sampled_fields_respect_the_moment_bounds() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    for k in [Kernel::gaussian(1.0, 0.5).unwrap(), Kernel::rosenhead(1.0, 0.5).unwrap()] {
        let moments = k.spectral_moments(Tolerance::default()).unwrap();
        let sups = k.derivative_sups();
        let set = random_set(&mut r, 10);
        let f = Field::new(&k, &set);
        let h = f.energy().total;
        let b = velocity_bounds(&moments, h);
        let l: f64 = set.vectors().iter().map(|v| v.norm()).sum();
        let mut max = [0.0f64; 4];
        let m = 20;
        for i in 0..m {
            for j in 0..m {
                for kk in 0..m {
                    let c = |v: usize| -1.5 + 3.0 * v as f64 / (m - 1) as f64;
                    let jet = f.jet(&Vec3::new(c(i), c(j), c(kk)));
                    max[0] = max[0].max(jet.u.norm());
                    max[1] = max[1].max(jet.du.norm());
                    max[2] = max[2].max(tensor_norm(&jet.d2u));
                    max[3] = max[3].max(jet.psi.norm());
                }
            }
        }
        assert!(max[0] <= b.b[0] && max[1] <= b.b[1] && max[2] <= b.b[2], "{k:?}: {max:?} vs {:?}", b.b);
        assert!(max[3] <= psi_bound(&moments, h, 0));
        for n in 0..3 {
            assert!(max[n] <= sups.derivative[n] * l, "{k:?} trivial bound n={n}");
        }
    }
}

#[test]
fn bound_scaling() {
    let m = Kernel::gaussian(1.0, 1.0).unwrap().spectral_moments(Tolerance::default()).unwrap();
    assert_eq!(velocity_bounds(&m, 0.0).b, [0.0; 3]);
    let a = velocity_bounds(&m, 0.7).b;
    let b = velocity_bounds(&m, 2.8).b;
    for n in 0..3 {
        assert!(rel(b[n], 2.0 * a[n]) < 1e-15);
    }
}
