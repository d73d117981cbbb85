//! Built-in initial conditions.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, VortexError};
use crate::kernel::Vec3;

fn check_count(name: &str, n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(VortexError::invalid(name, format!("must be >= {min}, got {n}")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(VortexError::invalid(name, format!("must be finite and > 0, got {v}")));
    }
    Ok(())
}

/// Orthonormal `(e1, e2)` spanning the plane normal to `n`.
fn plane_basis(normal: &Vec3) -> Result<(Vec3, Vec3)> {
    let n = normal
        .try_normalize(1e-300)
        .ok_or_else(|| VortexError::invalid("normal", "must be non-zero"))?;
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = (helper - n * n.dot(&helper)).normalize();
    let e2 = n.cross(&e1);
    Ok((e1, e2))
}

/// Regular `n`-gon inscribed in the circle of given radius, traversed
/// counter-clockwise about `normal`. With the default normal `z` the first
/// node is `centre + (R, 0, 0)`.
pub fn circle(radius: f64, n: usize, centre: Vec3, normal: Vec3) -> Result<Vec<Vec3>> {
    check_positive("radius", radius)?;
    check_count("n", n, 3)?;
    let (e1, e2) = if normal.x == 0.0 && normal.y == 0.0 && normal.z > 0.0 {
        (Vec3::x(), Vec3::y())
    } else {
        plane_basis(&normal)?
    };
    Ok((0..n)
        .map(|a| {
            let t = 2.0 * PI * a as f64 / n as f64;
            centre + (e1 * t.cos() + e2 * t.sin()) * radius
        })
        .collect())
}

/// Circle in the `z = 0` plane with smooth radial and vertical wobbles
/// built from Fourier modes `2..=modes + 1` with seeded coefficients.
///
/// Sampling the same curve at a different `n` gives a finer polyline of
/// the same smooth curve.
pub fn perturbed_circle(radius: f64, n: usize, amplitude: f64, modes: usize, seed: u64) -> Result<Vec<Vec3>> {
    check_positive("radius", radius)?;
    check_count("n", n, 3)?;
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(VortexError::invalid("amplitude", format!("must be finite and >= 0, got {amplitude}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef: Vec<[f64; 4]> = (0..modes)
        .map(|_| [0; 4].map(|_| rng.random_range(-1.0..1.0)))
        .collect();
    Ok((0..n)
        .map(|a| {
            let t = 2.0 * PI * a as f64 / n as f64;
            let mut dr = 0.0;
            let mut dz = 0.0;
            for (j, c) in coef.iter().enumerate() {
                let m = (j + 2) as f64;
                let (s, co) = (m * t).sin_cos();
                dr += (c[0] * co + c[1] * s) / m;
                dz += (c[2] * co + c[3] * s) / m;
            }
            let r = radius * (1.0 + amplitude * dr);
            Vec3::new(r * t.cos(), r * t.sin(), radius * amplitude * dz)
        })
        .collect())
}

fn in_unit_ball(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if v.norm_squared() <= 1.0 {
            return v;
        }
    }
}

/// `n` blobs uniformly placed in a ball, with vectors uniform in the ball
/// of radius `strength`.
pub fn blob_cloud(n: usize, radius: f64, strength: f64, seed: u64) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    check_count("n", n, 1)?;
    check_positive("radius", radius)?;
    check_positive("strength", strength)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let x = in_unit_ball(&mut rng) * radius;
            let xi = in_unit_ball(&mut rng) * strength;
            (x, xi)
        })
        .unzip())
}

/// Two loops a distance `separation` apart along `x`, one aligned with
/// `z` and one tilted towards `y`.
pub fn loop_pair(separation: f64, strength: f64) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    check_positive("separation", separation)?;
    check_positive("strength", strength)?;
    let h = 0.5 * separation;
    Ok((
        vec![Vec3::new(-h, 0.0, 0.0), Vec3::new(h, 0.0, 0.0)],
        vec![Vec3::new(0.0, 0.0, strength), Vec3::new(0.0, 0.6 * strength, 0.8 * strength)],
    ))
}

/// `per_side³` loops on a jittered cubic lattice filling the box, with
/// seeded moments uniform in the ball of radius `strength`.
pub fn loop_lattice(per_side: usize, strength: f64, jitter: f64, seed: u64) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    check_count("per_side", per_side, 1)?;
    check_positive("strength", strength)?;
    if !(jitter.is_finite() && jitter >= 0.0) {
        return Err(VortexError::invalid("jitter", format!("must be finite and >= 0, got {jitter}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 2.0 * PI / per_side as f64;
    let mut pos = Vec::new();
    let mut mom = Vec::new();
    for i in 0..per_side {
        for j in 0..per_side {
            for k in 0..per_side {
                let base = Vec3::new(i as f64, j as f64, k as f64).map(|c| -PI + (c + 0.5) * h);
                pos.push(base + in_unit_ball(&mut rng) * (jitter * h));
                mom.push(in_unit_ball(&mut rng) * strength);
            }
        }
    }
    Ok((pos, mom))
}
