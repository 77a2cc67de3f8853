//! Eigenfunctions and adjoint eigenfunctions of the critical modes.
//!
//! `phi1(theta) = exp(i w theta) (1, k1)`, `phi2 = (1, k3)` on `[-1, 0]`;
//! `psi1(s) = exp(-i w s) T1 (1, k2)`, `psi2 = T2 (1, k4)` on `[0, 1]`,
//! normalized so that `(psi_j, phi_j) = 1` under the bilinear form
//! `(a, b) = a(0) b(0) + int_{-1}^{0} a(xi + 1) B b(xi) dxi`.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64 as C;
use serde::Serialize;
use thiserror::Error;

use crate::model::LinearPart;
use crate::spectrum::{char_matrix, TuringHopfPoint};

pub type CVec = Vector2<C>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("eigenvector of {0} is not of the form (1, k)")]
    DegenerateEigenvector(&'static str),
    #[error("bilinear form supports polynomial degree up to {max}, got {got}")]
    UnsupportedBasisFunction { max: u32, got: u32 },
}

/// One term `coef * theta^power * exp(rate * theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coef: CVec,
    pub rate: C,
    pub power: u32,
}

/// Vector-valued exponential polynomial in one real variable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpPoly {
    pub terms: Vec<Term>,
}

const MAX_POWER: u32 = 8;

impl ExpPoly {
    pub fn zero() -> ExpPoly {
        ExpPoly::default()
    }

    pub fn exp(coef: CVec, rate: C) -> ExpPoly {
        ExpPoly { terms: vec![Term { coef, rate, power: 0 }] }
    }

    pub fn constant(coef: CVec) -> ExpPoly {
        ExpPoly::exp(coef, C::new(0.0, 0.0))
    }

    pub fn push(&mut self, coef: CVec, rate: C, power: u32) {
        if let Some(t) = self.terms.iter_mut().find(|t| t.rate == rate && t.power == power) {
            t.coef += coef;
        } else {
            self.terms.push(Term { coef, rate, power });
        }
    }

    pub fn eval(&self, x: f64) -> CVec {
        self.terms.iter().fold(CVec::zeros(), |acc, t| {
            acc + t.coef * ((t.rate * x).exp() * x.powi(t.power as i32))
        })
    }

    pub fn derivative(&self) -> ExpPoly {
        let mut out = ExpPoly::zero();
        for t in &self.terms {
            out.push(t.coef * t.rate, t.rate, t.power);
            if t.power > 0 {
                out.push(t.coef * C::new(t.power as f64, 0.0), t.rate, t.power - 1);
            }
        }
        out
    }

    pub fn scale(&self, c: C) -> ExpPoly {
        ExpPoly { terms: self.terms.iter().map(|t| Term { coef: t.coef * c, ..*t }).collect() }
    }

    pub fn add(&self, other: &ExpPoly) -> ExpPoly {
        let mut out = self.clone();
        for t in &other.terms {
            out.push(t.coef, t.rate, t.power);
        }
        out
    }

    pub fn conj(&self) -> ExpPoly {
        ExpPoly {
            terms: self
                .terms
                .iter()
                .map(|t| Term { coef: t.coef.map(|z| z.conj()), rate: t.rate.conj(), power: t.power })
                .collect(),
        }
    }

    pub fn max_power(&self) -> u32 {
        self.terms.iter().map(|t| t.power).max().unwrap_or(0)
    }
}

/// `int_{-1}^{0} xi^k exp(c xi) dxi`.
pub fn moment(k: u32, c: C) -> C {
    if c.norm() < 0.5 {
        let mut sum = C::new(0.0, 0.0);
        let mut term = C::new(1.0, 0.0);
        for j in 0..40u32 {
            let m = k + j;
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            sum += term * (sign / (m + 1) as f64);
            term = term * c / (j + 1) as f64;
        }
        sum
    } else {
        let e = (-c).exp();
        let mut prev = (C::new(1.0, 0.0) - e) / c;
        for j in 1..=k {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            prev = (-e * sign) / c - prev * (j as f64) / c;
        }
        prev
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(alpha, beta) = alpha(0) beta(0) + int_{-1}^{0} alpha(xi + 1) B beta(xi) dxi`,
/// with `alpha` read as a row function on `[0, 1]` and `beta` as a column function on `[-1, 0]`.
pub fn bilinear_form(alpha: &ExpPoly, beta: &ExpPoly, b: &Matrix2<f64>) -> Result<C, EigenError> {
    for f in [alpha, beta] {
        if f.max_power() > MAX_POWER {
            return Err(EigenError::UnsupportedBasisFunction { max: MAX_POWER, got: f.max_power() });
        }
    }
    let bc = b.map(|x| C::new(x, 0.0));
    let mut total = alpha.eval(0.0).transpose() * beta.eval(0.0);
    let mut sum = total[(0, 0)];
    for ta in &alpha.terms {
        // alpha term at xi + 1: coef (xi + 1)^p e^{rate} e^{rate xi}.
        let shift = ta.rate.exp();
        for tb in &beta.terms {
            let weight = (ta.coef.transpose() * bc * tb.coef)[(0, 0)] * shift;
            let rate = ta.rate + tb.rate;
            for q in 0..=ta.power {
                sum += weight * binomial(ta.power, q) * moment(q + tb.power, rate);
            }
        }
    }
    total[(0, 0)] = sum;
    Ok(total[(0, 0)])
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    pub omega: f64,
    pub n2: u32,
    pub l: f64,
    pub k1: C,
    pub k2: C,
    pub k3: C,
    pub k4: C,
    pub t1: C,
    pub t2: C,
    pub phi1: ExpPoly,
    pub phi2: ExpPoly,
    pub psi1: ExpPoly,
    pub psi2: ExpPoly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisResiduals {
    pub phi1: f64,
    pub phi2: f64,
    pub psi1: f64,
    pub psi2: f64,
    /// `|(psi1, phi1) - 1|`, `|(psi2, phi2) - 1|`.
    pub norm1: f64,
    pub norm2: f64,
    /// `|(psi1, conj phi1)|`.
    pub ortho: f64,
}

impl BasisResiduals {
    pub fn max(&self) -> f64 {
        [self.phi1, self.phi2, self.psi1, self.psi2, self.norm1, self.norm2, self.ortho]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Solves `M (1, k) = 0` from the first row, falling back to the second.
fn right_null(m: &Matrix2<C>, tol: f64, what: &'static str) -> Result<C, EigenError> {
    if m[(0, 1)].norm() >= tol {
        Ok(-m[(0, 0)] / m[(0, 1)])
    } else if m[(1, 1)].norm() >= tol {
        Ok(-m[(1, 0)] / m[(1, 1)])
    } else {
        Err(EigenError::DegenerateEigenvector(what))
    }
}

/// Solves `(1, k) M = 0` from the first column, falling back to the second.
fn left_null(m: &Matrix2<C>, tol: f64, what: &'static str) -> Result<C, EigenError> {
    right_null(&m.transpose(), tol, what)
}

impl EigenBasis {
    pub fn phi1_at(&self, theta: f64) -> CVec {
        self.phi1.eval(theta)
    }

    pub fn psi1_0(&self) -> CVec {
        self.psi1.eval(0.0)
    }

    pub fn psi2_0(&self) -> CVec {
        self.psi2.eval(0.0)
    }

    pub fn residuals(&self, lp: &LinearPart) -> BasisResiduals {
        let iw = C::new(0.0, self.omega);
        let m1 = char_matrix(lp, 0, self.l, iw);
        let m2 = char_matrix(lp, self.n2, self.l, C::new(0.0, 0.0));
        let phi1 = (m1 * self.phi1.eval(0.0)).norm();
        let phi2 = (m2 * self.phi2.eval(0.0)).norm();
        let psi1 = (self.psi1.eval(0.0).transpose() * m1).norm();
        let psi2 = (self.psi2.eval(0.0).transpose() * m2).norm();
        let one = C::new(1.0, 0.0);
        let bf = |a: &ExpPoly, b: &ExpPoly| bilinear_form(a, b, &lp.b).unwrap_or(C::new(f64::NAN, 0.0));
        BasisResiduals {
            phi1,
            phi2,
            psi1,
            psi2,
            norm1: (bf(&self.psi1, &self.phi1) - one).norm(),
            norm2: (bf(&self.psi2, &self.phi2) - one).norm(),
            ortho: bf(&self.psi1, &self.phi1.conj()).norm(),
        }
    }
}

/// Eigenvectors, adjoint eigenvectors and normalizations at a Turing-Hopf point.
pub fn compute_basis(lp: &LinearPart, p: &TuringHopfPoint) -> Result<EigenBasis, EigenError> {
    compute_basis_at(lp, p.omega, p.n2, p.l)
}

pub fn compute_basis_at(lp: &LinearPart, omega: f64, n2: u32, l: f64) -> Result<EigenBasis, EigenError> {
    let tol = 1e-8 * lp.scale(n2, l);
    let iw = C::new(0.0, omega);
    let e = (-iw).exp();
    let m1 = char_matrix(lp, 0, l, iw);
    let m2 = char_matrix(lp, n2, l, C::new(0.0, 0.0));
    let k1 = right_null(&m1, tol, "the Hopf mode")?;
    let k2 = left_null(&m1, tol, "the adjoint Hopf mode")?;
    let k3 = right_null(&m2, tol, "the Turing mode")?.re;
    let k4 = left_null(&m2, tol, "the adjoint Turing mode")?.re;
    let b = lp.b;
    let one = C::new(1.0, 0.0);
    let t1 = one
        / (k1 * k2
            + 1.0
            + e * (b[(0, 0)] + b[(1, 0)] * k2 + k1 * (b[(0, 1)] + b[(1, 1)] * k2)));
    let t2 = 1.0 / ((b[(0, 1)] + b[(1, 1)] * k4 + k4) * k3 + (b[(0, 0)] + b[(1, 0)] * k4 + 1.0));
    let (k3, k4, t2) = (C::new(k3, 0.0), C::new(k4, 0.0), C::new(t2, 0.0));
    Ok(EigenBasis {
        omega,
        n2,
        l,
        k1,
        k2,
        k3,
        k4,
        t1,
        t2,
        phi1: ExpPoly::exp(CVec::new(one, k1), iw),
        phi2: ExpPoly::constant(CVec::new(one, k3)),
        psi1: ExpPoly::exp(CVec::new(t1, t1 * k2), -iw),
        psi2: ExpPoly::constant(CVec::new(t2, t2 * k4)),
    })
}
