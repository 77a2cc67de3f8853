mod common;

use nalgebra::Matrix2;
use num_complex::Complex64 as C;
use turing_hopf::eigenbasis::{bilinear_form, compute_basis_at, CVec, EigenBasis, ExpPoly};
use turing_hopf::model::LinearPart;

fn cclose(a: C, b: C, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + b.norm())
}

/// `psi(0) phi(0) + int_{-1}^0 psi(xi + 1) B phi(xi) dxi` by Simpson's rule.
fn quadrature_pairing(psi: impl Fn(f64) -> CVec, phi: impl Fn(f64) -> CVec, b: &Matrix2<f64>) -> C {
    let bc = b.map(|x| C::new(x, 0.0));
    let n = 2000;
    let h = 1.0 / n as f64;
    let f = |xi: f64| (psi(xi + 1.0).transpose() * bc * phi(xi))[(0, 0)];
    let mut s = f(-1.0) + f(0.0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += f(-1.0 + i as f64 * h) * w;
    }
    (psi(0.0).transpose() * phi(0.0))[(0, 0)] + s * (h / 3.0)
}

fn holling_tanner_basis() -> (EigenBasis, LinearPart) {
    let a = common::analysis();
    (a.basis, a.bundle.linear)
}

#[test]
fn frozen_eigenvector_coefficients() {
    let (eb, _) = holling_tanner_basis();
    assert!(cclose(eb.k1, C::new(0.35968757625671527, -3.9596089532075287), 1e-10));
    assert!(cclose(eb.k2, C::new(-1.0000000000000004, 0.16171102533359816), 1e-10));
    assert!(cclose(eb.k3, C::new(0.22267195506955104, 0.0), 1e-10));
    assert!(cclose(eb.k4, C::new(-0.05673280449304492, 0.0), 1e-10));
    assert!(cclose(eb.t1, C::new(-0.11351254458405871, -0.12383555601694698), 1e-10));
    assert!(cclose(eb.t2, C::new(1.0756502199976556, 0.0), 1e-10));
}

#[test]
fn eigen_relations_hold() {
    let (eb, lp) = holling_tanner_basis();
    let r = eb.residuals(&lp);
    assert!(r.max() < 1e-12, "{r:?}");
}

#[test]
fn normalization_matches_quadrature() {
    let (eb, lp) = holling_tanner_basis();
    let iw = C::new(0.0, eb.omega);
    let phi1 = |t: f64| CVec::new(C::new(1.0, 0.0), eb.k1) * (iw * t).exp();
    let psi1 = |s: f64| CVec::new(eb.t1, eb.t1 * eb.k2) * (-iw * s).exp();
    let phi2 = |_: f64| CVec::new(C::new(1.0, 0.0), eb.k3);
    let psi2 = |_: f64| CVec::new(eb.t2, eb.t2 * eb.k4);
    let one = C::new(1.0, 0.0);
    assert!(cclose(quadrature_pairing(psi1, phi1, &lp.b), one, 1e-12));
    assert!(cclose(quadrature_pairing(psi2, phi2, &lp.b), one, 1e-12));
    let phi1_bar = |t: f64| phi1(t).map(|z| z.conj());
    assert!(quadrature_pairing(psi1, phi1_bar, &lp.b).norm() < 1e-12);
}

#[test]
fn bilinear_form_with_polynomial_terms_matches_quadrature() {
    let (eb, lp) = holling_tanner_basis();
    let mut beta = ExpPoly::zero();
    beta.push(CVec::new(C::new(0.3, 0.1), C::new(-1.0, 0.4)), C::new(0.0, 2.0 * eb.omega), 0);
    beta.push(CVec::new(C::new(1.0, 0.0), C::new(0.2, -0.7)), C::new(0.0, eb.omega), 2);
    beta.push(CVec::new(C::new(0.5, 0.0), C::new(0.5, 0.0)), C::new(0.0, 0.0), 1);
    let direct = bilinear_form(&eb.psi1, &beta, &lp.b).unwrap();
    let quad = quadrature_pairing(|s| eb.psi1.eval(s), |t| beta.eval(t), &lp.b);
    assert!(cclose(direct, quad, 1e-11), "{direct} vs {quad}");
}

#[test]
fn perturbed_models_give_normalized_bases() {
    for m in common::perturbed_models(3, 10) {
        let a = turing_hopf::pipeline::Analysis::run(&m).unwrap();
        let r = a.basis.residuals(&a.bundle.linear);
        assert!(r.max() < 1e-10, "{r:?}");
        let again = compute_basis_at(&a.bundle.linear, a.point.omega, a.point.n2, a.point.l).unwrap();
        assert_eq!(again, a.basis);
    }
}
