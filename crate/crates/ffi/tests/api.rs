use std::f64::consts::PI;
use std::ffi::CStr;
use std::ptr;

use vortex_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as std::ffi::c_char; 256];
    unsafe { vx_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn ring(n: usize) -> Vec<f64> {
    (0..n)
        .flat_map(|a| {
            let t = 2.0 * PI * a as f64 / n as f64;
            [t.cos(), t.sin(), 0.1 * (3.0 * t).sin()]
        })
        .collect()
}

fn rosenhead() -> *mut VxKernel {
    let mut k = ptr::null_mut();
    assert_eq!(unsafe { vx_kernel_rosenhead(1.0, 0.5, &mut k) }, VxStatus::Ok);
    k
}

#[test]
fn kernel_value_and_admissibility() {
    let k = rosenhead();
    let mut v = 0.0;
    let x = [0.0, 0.0, 0.0];
    assert_eq!(unsafe { vx_kernel_value(k, x.as_ptr(), &mut v) }, VxStatus::Ok);
    assert!((v - 1.0 / (4.0 * PI * 0.5)).abs() < 1e-15);
    let mut passed = 0;
    assert_eq!(unsafe { vx_kernel_verify(k, &mut passed) }, VxStatus::Ok);
    assert_eq!(passed, 1);
    unsafe { vx_kernel_free(k) };
}

#[test]
fn invalid_parameters_set_the_last_error() {
    let mut k = ptr::null_mut();
    assert_eq!(unsafe { vx_kernel_rosenhead(1.0, -1.0, &mut k) }, VxStatus::InvalidParameter);
    assert!(k.is_null());
    assert!(last_error().contains("mu"), "{}", last_error());
    let needed = unsafe { vx_last_error(ptr::null_mut(), 0) };
    assert_eq!(needed, last_error().len());
    let k = rosenhead();
    assert!(last_error().is_empty());
    unsafe { vx_kernel_free(k) };
}

#[test]
fn null_handles_are_reported() {
    let mut e = 0.0;
    assert_eq!(unsafe { vx_state_energy(ptr::null(), &mut e) }, VxStatus::NullPointer);
    assert_eq!(unsafe { vx_kernel_rosenhead(1.0, 0.5, ptr::null_mut()) }, VxStatus::NullPointer);
    unsafe {
        vx_state_free(ptr::null_mut());
        vx_kernel_free(ptr::null_mut());
        vx_lattice_free(ptr::null_mut());
    }
}

#[test]
fn filament_lifecycle() {
    let k = rosenhead();
    let nodes = ring(24);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { vx_filament_new(k, nodes.as_ptr(), 24, &mut s) }, VxStatus::Ok);
    unsafe { vx_kernel_free(k) };

    let (mut model, mut n) = (VxModel::Loops, 0);
    assert_eq!(unsafe { vx_state_info(s, &mut model, &mut n) }, VxStatus::Ok);
    assert_eq!((model, n), (VxModel::Filament, 24));

    let mut h0 = 0.0;
    assert_eq!(unsafe { vx_state_energy(s, &mut h0) }, VxStatus::Ok);
    assert!(h0 > 0.0);
    let mut rate = 0.0;
    assert_eq!(unsafe { vx_state_energy_rate(s, &mut rate) }, VxStatus::Ok);

    let mut small = vec![0.0; 3 * 10];
    assert_eq!(unsafe { vx_state_rhs(s, small.as_mut_ptr(), 10) }, VxStatus::BufferTooSmall);
    let mut u = vec![0.0; 3 * 24];
    assert_eq!(unsafe { vx_state_rhs(s, u.as_mut_ptr(), 24) }, VxStatus::Ok);
    let mut scores = vec![0.0; 24];
    assert_eq!(unsafe { vx_filament_scores(s, scores.as_mut_ptr(), 24) }, VxStatus::Ok);
    let mut vectors = vec![0.0; 3 * 24];
    assert_eq!(unsafe { vx_state_vectors(s, vectors.as_mut_ptr(), 24) }, VxStatus::WrongModel);

    for i in 0..10 {
        assert_eq!(unsafe { vx_state_step(s, VxScheme::Rk4, 0.01, i as f64 * 0.01) }, VxStatus::Ok);
    }
    let mut h1 = 0.0;
    unsafe { vx_state_energy(s, &mut h1) };
    assert!(((h1 - h0) / h0).abs() < 1e-3);
    assert_eq!(unsafe { vx_state_step(s, VxScheme::ImplicitMidpoint, 0.01, 0.0) }, VxStatus::InvalidParameter);

    assert_eq!(unsafe { vx_filament_refine(s, 0.01, 0.005, 0.0, 100_000) }, VxStatus::Ok);
    unsafe { vx_state_info(s, &mut model, &mut n) };
    assert!(n > 24 && n % 24 == 0);
    assert_eq!(unsafe { vx_filament_refine(s, 1e-6, 5e-7, 0.0, 200) }, VxStatus::MaxPointsExceeded);
    unsafe { vx_state_free(s) };
}

#[test]
fn blobs_and_loops() {
    let k = rosenhead();
    let pos = [0.0, 0.0, 0.0, 0.5, 0.1, -0.2];
    let vec = [0.0, 0.0, 1.0, 0.3, -0.4, 0.2];
    let mut b = ptr::null_mut();
    assert_eq!(unsafe { vx_blobs_new(k, pos.as_ptr(), vec.as_ptr(), 2, &mut b) }, VxStatus::Ok);
    let mut rhs = [0.0; 12];
    assert_eq!(unsafe { vx_state_rhs(b, rhs.as_mut_ptr(), 4) }, VxStatus::Ok);
    let mut out = [0.0; 6];
    assert_eq!(unsafe { vx_state_vectors(b, out.as_mut_ptr(), 2) }, VxStatus::Ok);
    assert_eq!(out, vec);
    let mut scores = [0.0; 2];
    assert_eq!(unsafe { vx_filament_scores(b, scores.as_mut_ptr(), 2) }, VxStatus::WrongModel);
    unsafe {
        vx_state_free(b);
        vx_kernel_free(k);
    }

    let mut lat = ptr::null_mut();
    assert_eq!(unsafe { vx_lattice_gaussian(1.0, 4, 1e-10, &mut lat) }, VxStatus::CutoffTooSmall);
    assert_eq!(unsafe { vx_lattice_gaussian(1.0, 8, 1e-10, &mut lat) }, VxStatus::Ok);
    let mut l = ptr::null_mut();
    assert_eq!(unsafe { vx_loops_new(lat, pos.as_ptr(), vec.as_ptr(), 2, &mut l) }, VxStatus::Ok);
    unsafe { vx_lattice_free(lat) };
    let mut h0 = 0.0;
    unsafe { vx_state_energy(l, &mut h0) };
    for i in 0..10 {
        assert_eq!(unsafe { vx_state_step(l, VxScheme::ImplicitMidpoint, 0.05, i as f64 * 0.05) }, VxStatus::Ok);
    }
    let mut h1 = 0.0;
    unsafe { vx_state_energy(l, &mut h1) };
    assert!(((h1 - h0) / h0).abs() < 1e-6);
    unsafe { vx_state_free(l) };
}
