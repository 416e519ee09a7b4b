//! Library results against independent references: explicit RK4 for the
//! Lyapunov equation, plain Taylor series for the exponential, and closed
//! forms for textbook Gaussian states.

use std::f64::consts::{LN_2, SQRT_2};

use epgauss_core::chain::{build_system, initial_squeezed_cm, params_from_epsilon};
use epgauss_core::gaussian::{matrix_exp, propagate};
use epgauss_core::metrics::{self, ChainMetrics};
use epgauss_core::{CovarianceMatrix, EpsilonPoint, Frame, C64};
use nalgebra::{DMatrix, Matrix2, Matrix4};

fn rk4(gamma: &DMatrix<f64>, d: &DMatrix<f64>, v0: &DMatrix<f64>, t: f64, h: f64) -> DMatrix<f64> {
    let rhs = |v: &DMatrix<f64>| gamma * v + v * gamma.transpose() + d;
    let n = (t / h).round() as usize;
    let mut v = v0.clone();
    for _ in 0..n {
        let k1 = rhs(&v);
        let k2 = rhs(&(&v + &k1 * (h / 2.0)));
        let k3 = rhs(&(&v + &k2 * (h / 2.0)));
        let k4 = rhs(&(&v + &k3 * h));
        v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    v
}

fn taylor_exp(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut term = DMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..80 {
        term = &term * m / k as f64;
        sum += &term;
    }
    sum
}

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

#[test]
fn propagation_matches_rk4() {
    let points = [
        (1e-3, EpsilonPoint::real(2.0, 0.0), Frame::RotatingAtOmega1),
        (1e-3, EpsilonPoint::real(1.0, 2.0), Frame::RotatingAtOmega1),
        (0.1, EpsilonPoint::new(C64::new(0.7, 0.4), C64::new(1.3, -0.2)), Frame::RotatingAtOmega1),
        (1e-2, EpsilonPoint::real(3.0, 0.5), Frame::Lab { omega1: 3.0 }),
    ];
    for (kappa1, ep, frame) in points {
        let p = params_from_epsilon(kappa1, ep, frame).unwrap();
        let sys = build_system(&p);
        let v0 = initial_squeezed_cm(0.8).unwrap();
        let exact = propagate(&sys, &v0, 3.0).unwrap();
        let reference = rk4(sys.gamma(), sys.diffusion(), v0.matrix(), 3.0, 1e-3);
        assert!(max_diff(exact.matrix(), &reference) < 1e-9, "{ep:?}: {}", max_diff(exact.matrix(), &reference));
    }
}

#[test]
fn exponential_matches_taylor_series() {
    let p = params_from_epsilon(1e-3, EpsilonPoint::real(1.0, 2.0), Frame::RotatingAtOmega1).unwrap();
    let gamma = build_system(&p).gamma().clone();
    for t in [0.05, 0.5, 1.5] {
        let e = matrix_exp(&gamma, t).unwrap();
        let reference = taylor_exp(&(&gamma * t));
        assert!(max_diff(&e, &reference) < 1e-12, "t = {t}");
    }
}

#[test]
fn two_mode_squeezed_vacuum_negativity() {
    for r in [0.1f64, 0.5, 1.0, 1.7] {
        let (c, s) = ((2.0 * r).cosh() / 2.0, (2.0 * r).sinh() / 2.0);
        #[rustfmt::skip]
        let v = Matrix4::new(
            c, 0.0, s, 0.0,
            0.0, c, 0.0, -s,
            s, 0.0, c, 0.0,
            0.0, -s, 0.0, c,
        );
        let e = metrics::log_negativity(&v).unwrap();
        assert!((e - 2.0 * r / LN_2).abs() < 1e-12, "r = {r}: {e}");
    }
}

#[test]
fn squeezed_thermal_decomposition() {
    let (r, n, theta) = (0.7_f64, 0.3_f64, 0.4_f64);
    let rot = Matrix2::new(theta.cos(), -theta.sin(), theta.sin(), theta.cos());
    let v = rot * Matrix2::new((2.0 * r).exp(), 0.0, 0.0, (-2.0 * r).exp()) * rot.transpose() * ((2.0 * n + 1.0) / 2.0);
    let d = metrics::single_mode_decomposition(&v).unwrap();
    assert!((d.r - r).abs() < 1e-12);
    assert!((d.n_bar - n).abs() < 1e-12);
    assert!((d.phi - 2.0 * theta).abs() < 1e-12);
    assert!((d.purity - 1.0 / (2.0 * n + 1.0)).abs() < 1e-12);
}

#[test]
fn squeezed_vacuum_overlap() {
    for r in [0.0f64, 0.3, 1.0, 2.0] {
        let f = metrics::reset_fidelity(&initial_squeezed_cm(r).unwrap()).fidelity;
        assert!((f - 1.0 / r.cosh()).abs() < 1e-13, "r = {r}");
    }
    assert_eq!(metrics::reset_fidelity(&CovarianceMatrix::vacuum(3)).infidelity, 0.0);
}

/// Long-time state at the EP-2 with a nearly lossless dark mode, computed by
/// brute-force propagation, against the closed-form bounds.
#[test]
fn bounds_match_long_time_propagation() {
    for r in [0.25, 1.0, 2.0] {
        let p = params_from_epsilon(1e-12, EpsilonPoint::real(2.0, 0.0), Frame::RotatingAtOmega1).unwrap();
        let v = propagate(&build_system(&p), &initial_squeezed_cm(r).unwrap(), 60.0).unwrap();
        let m = ChainMetrics::from_cm(&v).unwrap();
        let b = metrics::quasistable_bounds(r).unwrap();
        assert!((m.modes[0].r - b.r_star).abs() < 1e-8, "r = {r}");
        assert!((m.modes[0].n_bar - b.n_bar_star).abs() < 1e-8, "r = {r}");
        assert!((m.e13 - b.e13_star).abs() < 1e-8, "r = {r}");
        assert!(m.modes[1].r.abs() < 1e-8 && m.e12.abs() < 1e-8);
    }
}

/// The dark mode of the EP-2 decays at κ₁ regardless of κ₂.
#[test]
fn ep2_dark_mode_rate() {
    let kappa1 = 0.05;
    let p = params_from_epsilon(kappa1, EpsilonPoint::real(2.0, 0.0), Frame::RotatingAtOmega1).unwrap();
    assert!((p.kappa()[1] - (kappa1 + 4.0 * SQRT_2)).abs() < 1e-14);
    let gamma = build_system(&p).gamma().clone();
    let e = gamma.complex_eigenvalues();
    let slowest = e.iter().map(|z| -z.re).fold(f64::INFINITY, f64::min);
    assert!((slowest - kappa1 / 2.0).abs() < 1e-10);
}
