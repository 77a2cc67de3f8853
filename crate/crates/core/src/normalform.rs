//! Third-order normal form on the center manifold.
//!
//! The quadratic corrections `h_q(theta, x)` are expanded in the cosine basis
//! `beta_0, beta_n2, beta_2n2`. Each component solves the linear boundary
//! value problem
//!
//! ```text
//! H'(theta) = i w_q H(theta) + P(theta),                       -1 <= theta < 0
//! (i w_q + kappa_j D - A) H(0) - B H(-1) = F_q c_qj - P(0)
//! ```
//!
//! where `w_q` is the frequency of the monomial `q`, `c_qj` the mode overlap
//! and `P = Phi Psi(0) F_q c_qj` the center projection. Solutions are
//! exponential polynomials, so every later contraction is exact.

use nalgebra::Matrix2;
use num_complex::Complex64 as C;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

use crate::eigenbasis::{bilinear_form, CVec, EigenBasis, EigenError, ExpPoly};
use crate::model::{DerivativeBundle, LinearPart};

/// Largest accepted scaled residual in [`validate_h`].
pub const VALIDATION_TOL: f64 = 1e-7;
/// Largest accepted condition number of a resolvent matrix.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormalFormError {
    #[error("resolvent {matrix} is singular or ill-conditioned (condition {condition:.3e})")]
    Resonance { matrix: String, condition: f64 },
    #[error("h-function residual {residual:.3e} exceeds {VALIDATION_TOL:e}")]
    ValidationFailed { residual: f64 },
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// Second- and third-order coefficient vectors and linear parameter vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVectors {
    /// `F_{alpha_i z1}`, `i = 1, 2`.
    pub alpha_z1: [CVec; 2],
    /// `F_{alpha_i z2}`.
    pub alpha_z2: [CVec; 2],
    /// `y0[j][i] = F_{y_i(0) z}` for `z` in `(z1, conj z1, z2)`.
    pub y0: [[CVec; 2]; 3],
    /// `ym1[j][i] = F_{y_i(-1) z}`.
    pub ym1: [[CVec; 2]; 3],
    pub f200: CVec,
    pub f110: CVec,
    pub f101: CVec,
    pub f020: CVec,
    pub f011: CVec,
    pub f002: CVec,
    pub f210: CVec,
    pub f102: CVec,
    pub f111: CVec,
    pub f003: CVec,
}

fn c(x: f64) -> C {
    C::new(x, 0.0)
}

fn d2(bundle: &DerivativeBundle, a: &[C; 4], b: &[C; 4]) -> CVec {
    let mut out = CVec::zeros();
    for h in 0..2 {
        let mut s = C::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                s += a[i] * b[j] * bundle.second[h][i][j];
            }
        }
        out[h] = s;
    }
    out
}

fn d3(bundle: &DerivativeBundle, a: &[C; 4], b: &[C; 4], e: &[C; 4]) -> CVec {
    let mut out = CVec::zeros();
    for h in 0..2 {
        let mut s = C::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                let ab = a[i] * b[j];
                for k in 0..4 {
                    s += ab * e[k] * bundle.third[h][i][j][k];
                }
            }
        }
        out[h] = s;
    }
    out
}

fn cmat(m: &Matrix2<f64>) -> Matrix2<C> {
    m.map(c)
}

/// Contracts the derivative bundle with the center eigenvectors.
pub fn coeff_vectors(bundle: &DerivativeBundle, eb: &EigenBasis) -> CoeffVectors {
    let lp = &bundle.linear;
    let e = C::new(0.0, -eb.omega).exp();
    let q1 = [c(1.0), eb.k1, e, eb.k1 * e];
    let q1b = q1.map(|z| z.conj());
    let q2 = [c(1.0), eb.k3, c(1.0), eb.k3];
    let unit = |i: usize| {
        let mut v = [c(0.0); 4];
        v[i] = c(1.0);
        v
    };
    let y = |offset: usize, q: &[C; 4]| [d2(bundle, &unit(offset), q) * c(2.0), d2(bundle, &unit(offset + 1), q) * c(2.0)];
    let kappa = (eb.n2 as f64 / eb.l).powi(2);
    let phi1_0 = eb.phi1.eval(0.0);
    let phi1_m1 = eb.phi1.eval(-1.0);
    let phi2 = eb.phi2.eval(0.0);
    let alpha_z1 = [0, 1].map(|p| (cmat(&lp.da[p]) * phi1_0 + cmat(&lp.db[p]) * phi1_m1) * c(2.0));
    let alpha_z2 = [0, 1].map(|p| {
        (cmat(&(lp.da[p] + lp.db[p] - lp.dd[p] * kappa)) * phi2) * c(2.0)
    });
    let f200 = d2(bundle, &q1, &q1);
    let f101 = d2(bundle, &q1, &q2) * c(2.0);
    CoeffVectors {
        alpha_z1,
        alpha_z2,
        y0: [y(0, &q1), y(0, &q1b), y(0, &q2)],
        ym1: [y(2, &q1), y(2, &q1b), y(2, &q2)],
        f200,
        f110: d2(bundle, &q1, &q1b) * c(2.0),
        f101,
        f020: f200.map(|z| z.conj()),
        f011: f101.map(|z| z.conj()),
        f002: d2(bundle, &q2, &q2),
        f210: d3(bundle, &q1, &q1, &q1b) * c(3.0),
        f102: d3(bundle, &q1, &q2, &q2) * c(3.0),
        f111: d3(bundle, &q1, &q1b, &q2) * c(6.0),
        f003: d3(bundle, &q2, &q2, &q2),
    }
}

/// Quadratic monomials of the center coordinates `(z1, conj z1, z2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Monomial {
    #[serde(rename = "200")]
    Z200,
    #[serde(rename = "110")]
    Z110,
    #[serde(rename = "101")]
    Z101,
    #[serde(rename = "011")]
    Z011,
    #[serde(rename = "002")]
    Z002,
}

impl Monomial {
    pub const ALL: [Monomial; 5] = [Monomial::Z200, Monomial::Z110, Monomial::Z101, Monomial::Z011, Monomial::Z002];

    /// Multiple of `w0` carried by the monomial.
    pub fn frequency(self) -> f64 {
        match self {
            Monomial::Z200 => 2.0,
            Monomial::Z101 => 1.0,
            Monomial::Z011 => -1.0,
            Monomial::Z110 | Monomial::Z002 => 0.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Monomial::Z200 => "200",
            Monomial::Z110 => "110",
            Monomial::Z101 => "101",
            Monomial::Z011 => "011",
            Monomial::Z002 => "002",
        }
    }

    fn vector(self, cv: &CoeffVectors) -> CVec {
        match self {
            Monomial::Z200 => cv.f200,
            Monomial::Z110 => cv.f110,
            Monomial::Z101 => cv.f101,
            Monomial::Z011 => cv.f011,
            Monomial::Z002 => cv.f002,
        }
    }

    /// `<beta_a beta_b, beta_target>` for the spatial factors of the monomial.
    fn overlap(self, target: Target, l: f64) -> f64 {
        let s = 1.0 / (l * PI).sqrt();
        match (self, target) {
            (Monomial::Z200 | Monomial::Z110, Target::Zero) => s,
            (Monomial::Z101 | Monomial::Z011, Target::N2) => s,
            (Monomial::Z002, Target::Zero) => s,
            (Monomial::Z002, Target::TwoN2) => 1.0 / (2.0 * l * PI).sqrt(),
            _ => 0.0,
        }
    }
}

/// Spatial mode carrying a component of `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Zero,
    N2,
    TwoN2,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::Zero, Target::N2, Target::TwoN2];

    pub fn mode(self, n2: u32) -> u32 {
        match self {
            Target::Zero => 0,
            Target::N2 => n2,
            Target::TwoN2 => 2 * n2,
        }
    }
}

/// One cosine component `H(theta)` of a quadratic correction.
#[derive(Debug, Clone, PartialEq)]
pub struct HComponent {
    pub monomial: Monomial,
    pub target: Target,
    /// Frequency `w_q` of the monomial.
    pub omega_q: f64,
    /// Projected forcing `F_q c_qj`.
    pub rhs: CVec,
    pub h: ExpPoly,
    /// Condition number of the resolvent used, zero when no solve was needed.
    pub condition: f64,
}

/// The projected quadratic corrections used by the cubic coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct HFunctions {
    /// `<h200 beta_0, beta_0>`.
    pub h200: ExpPoly,
    /// `<h110 beta_0, beta_0>`, equal to `<h110 beta_n2, beta_n2>`.
    pub h110: ExpPoly,
    /// `<h101 beta_n2, beta_0>`.
    pub h101: ExpPoly,
    /// `<h011 beta_0, beta_n2>`.
    pub h011: ExpPoly,
    /// `<h002 beta_0, beta_0>`.
    pub h002_0: ExpPoly,
    /// `<h002 beta_n2, beta_n2>`.
    pub h002_n2: ExpPoly,
    pub components: Vec<HComponent>,
    pub validation: Validation,
}

impl HFunctions {
    pub fn component(&self, m: Monomial, t: Target) -> &HComponent {
        self.components
            .iter()
            .find(|x| x.monomial == m && x.target == t)
            .expect("all monomial/target pairs are present")
    }
}

/// Center projection `P(theta)` of the forcing for a component.
fn projection(eb: &EigenBasis, target: Target, rhs: &CVec) -> ExpPoly {
    let dot = |row: CVec| (row.transpose() * rhs)[(0, 0)];
    match target {
        Target::Zero => {
            let psi = eb.psi1.eval(0.0);
            eb.phi1.scale(dot(psi)).add(&eb.phi1.conj().scale(dot(psi.map(|z| z.conj()))))
        }
        Target::N2 => eb.phi2.scale(dot(eb.psi2.eval(0.0))),
        Target::TwoN2 => ExpPoly::zero(),
    }
}

fn condition(m: &Matrix2<C>) -> f64 {
    let sv = m.svd(false, false).singular_values;
    let (hi, lo) = (sv.max(), sv.min());
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

fn resolvent_name(m: Monomial, t: Target) -> String {
    let lam = match m {
        Monomial::Z200 => "2i w0",
        Monomial::Z101 => "i w0",
        Monomial::Z011 => "-i w0",
        Monomial::Z110 | Monomial::Z002 => "0",
    };
    let diff = match t {
        Target::Zero => "",
        Target::N2 => " + (n2/l)^2 D",
        Target::TwoN2 => " + (2 n2/l)^2 D",
    };
    format!("[{lam}{diff} - A - B e^(-{lam})]")
}

fn solve_component(
    lp: &LinearPart,
    eb: &EigenBasis,
    monomial: Monomial,
    target: Target,
    rhs: CVec,
) -> Result<HComponent, NormalFormError> {
    let omega_q = monomial.frequency() * eb.omega;
    if rhs.iter().all(|z| *z == C::new(0.0, 0.0)) {
        return Ok(HComponent { monomial, target, omega_q, rhs, h: ExpPoly::zero(), condition: 0.0 });
    }
    let iwq = C::new(0.0, omega_q);
    let p = projection(eb, target, &rhs);
    let mut hp = ExpPoly::zero();
    for t in &p.terms {
        debug_assert_eq!(t.power, 0);
        if (t.rate - iwq).norm() > 1e-12 * (1.0 + eb.omega) {
            hp.push(t.coef / (t.rate - iwq), t.rate, 0);
        } else {
            hp.push(t.coef, t.rate, 1);
        }
    }
    let kappa = (target.mode(eb.n2) as f64 / eb.l).powi(2);
    let base = Matrix2::identity().map(|x: f64| c(x) * iwq) + cmat(&(lp.d * kappa - lp.a));
    let b = cmat(&lp.b);
    let m = base - b * (-iwq).exp();
    let cond = condition(&m);
    if !(cond <= MAX_CONDITION) {
        return Err(NormalFormError::Resonance { matrix: resolvent_name(monomial, target), condition: cond });
    }
    let residual = rhs - p.eval(0.0) - (base * hp.eval(0.0) - b * hp.eval(-1.0));
    let coef = m.lu().solve(&residual).ok_or(NormalFormError::Resonance {
        matrix: resolvent_name(monomial, target),
        condition: f64::INFINITY,
    })?;
    let mut h = hp;
    h.push(coef, iwq, 0);
    Ok(HComponent { monomial, target, omega_q, rhs, h, condition: cond })
}

/// Residuals of the defining relations for the quadratic corrections.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Validation {
    /// Interior equation at 20 points of `[-1, 0)`.
    pub interior: f64,
    /// Relation at `theta = 0`.
    pub boundary: f64,
    /// Complement conditions `(psi, H) = 0` over every component.
    pub complement: f64,
    /// The four conditions `(psi1, <h101, beta_0>)`, `(conj psi1, <h011, beta_0>)`,
    /// `(psi2, <h110, beta_n2>)`, `(psi2, <h002, beta_n2>)`.
    pub conditions: [f64; 4],
    pub max: f64,
    /// Sign in front of the resolvent term that satisfies the relations.
    pub resolvent_sign: String,
}

impl Validation {
    /// Fails when the largest residual exceeds [`VALIDATION_TOL`].
    pub fn ensure(&self) -> Result<(), NormalFormError> {
        if self.max <= VALIDATION_TOL {
            Ok(())
        } else {
            Err(NormalFormError::ValidationFailed { residual: self.max })
        }
    }
}

/// Checks each component against its boundary value problem and the
/// complement conditions.
pub fn validate_h(h: &HFunctions, eb: &EigenBasis, lp: &LinearPart) -> Result<Validation, NormalFormError> {
    let scale = lp.scale(eb.n2, eb.l);
    let b = cmat(&lp.b);
    let psi1 = eb.psi1.clone();
    let psi1b = eb.psi1.conj();
    let psi2 = eb.psi2.clone();
    let (mut interior, mut boundary, mut complement) = (0.0f64, 0.0f64, 0.0f64);
    for comp in &h.components {
        let norm = 1.0 + comp.rhs.norm();
        let iwq = C::new(0.0, comp.omega_q);
        let p = projection(eb, comp.target, &comp.rhs);
        let dh = comp.h.derivative();
        for k in 0..20 {
            let theta = -1.0 + k as f64 / 20.0;
            let r = dh.eval(theta) - comp.h.eval(theta) * iwq - p.eval(theta);
            interior = interior.max(r.norm() / (scale * norm));
        }
        let kappa = (comp.target.mode(eb.n2) as f64 / eb.l).powi(2);
        let lhs = comp.h.eval(0.0) * iwq + cmat(&(lp.d * kappa - lp.a)) * comp.h.eval(0.0) - b * comp.h.eval(-1.0);
        boundary = boundary.max((lhs - (comp.rhs - p.eval(0.0))).norm() / (scale * norm));
        let tests: Vec<&ExpPoly> = match comp.target {
            Target::Zero => vec![&psi1, &psi1b],
            Target::N2 => vec![&psi2],
            Target::TwoN2 => vec![],
        };
        for psi in tests {
            complement = complement.max(bilinear_form(psi, &comp.h, &lp.b)?.norm() / norm);
        }
    }
    let cond = |m: Monomial, t: Target, psi: &ExpPoly| -> Result<f64, NormalFormError> {
        let comp = h.component(m, t);
        Ok(bilinear_form(psi, &comp.h, &lp.b)?.norm() / (1.0 + comp.rhs.norm()))
    };
    let conditions = [
        cond(Monomial::Z101, Target::Zero, &psi1)?,
        cond(Monomial::Z011, Target::Zero, &psi1b)?,
        cond(Monomial::Z110, Target::N2, &psi2)?,
        cond(Monomial::Z002, Target::N2, &psi2)?,
    ];
    let max = conditions.iter().copied().fold(interior.max(boundary).max(complement), f64::max);
    Ok(Validation { interior, boundary, complement, conditions, max, resolvent_sign: "+".into() })
}

/// Solves for all quadratic corrections and validates them.
pub fn h_functions(cv: &CoeffVectors, eb: &EigenBasis, lp: &LinearPart) -> Result<HFunctions, NormalFormError> {
    let mut components = Vec::new();
    for m in Monomial::ALL {
        for t in Target::ALL {
            let rhs = m.vector(cv) * c(m.overlap(t, eb.l));
            components.push(solve_component(lp, eb, m, t, rhs)?);
        }
    }
    let s = 1.0 / (eb.l * PI).sqrt();
    let s2 = 1.0 / (2.0 * eb.l * PI).sqrt();
    let get = |m: Monomial, t: Target| {
        components.iter().find(|x| x.monomial == m && x.target == t).map(|x| x.h.clone()).unwrap_or_default()
    };
    let h002_0 = get(Monomial::Z002, Target::Zero).scale(c(s));
    let mut h = HFunctions {
        h200: get(Monomial::Z200, Target::Zero).scale(c(s)),
        h110: get(Monomial::Z110, Target::Zero).scale(c(s)),
        h101: get(Monomial::Z101, Target::N2).scale(c(s)),
        h011: get(Monomial::Z011, Target::N2).scale(c(s)),
        h002_n2: h002_0.add(&get(Monomial::Z002, Target::TwoN2).scale(c(s2))),
        h002_0,
        components,
        validation: Validation {
            interior: 0.0,
            boundary: 0.0,
            complement: 0.0,
            conditions: [0.0; 4],
            max: 0.0,
            resolvent_sign: "+".into(),
        },
    };
    h.validation = validate_h(&h, eb, lp)?;
    h.validation.ensure()?;
    Ok(h)
}

/// Scalar projections `f^{1i}_{mnk}` that enter the cubic coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Projections {
    pub f11_200: C,
    pub f11_110: C,
    pub f11_020: C,
    pub f11_002: C,
    pub f12_200: C,
    pub f12_110: C,
    pub f12_002: C,
    pub f13_101: C,
    pub f13_011: C,
    pub f11_210: C,
    pub f11_102: C,
    pub f13_111: C,
    pub f13_003: C,
}

/// Coefficients of the truncated normal form
///
/// ```text
/// z1' = i w0 z1 + (f_a1 a1 + f_a2 a2) z1 / 2 + (g210 z1^2 conj z1 + g102 z1 z2^2) / 6
/// z2' = (f_a1 a1 + f_a2 a2) z2 / 2 + (g111 |z1|^2 z2 + g003 z2^3) / 6
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormCoeffs {
    pub f11_alpha: [C; 2],
    pub f13_alpha: [C; 2],
    pub g210: C,
    pub g102: C,
    pub g111: C,
    pub g003: C,
    pub projections: Projections,
    pub omega: f64,
    pub n2: u32,
    pub l: f64,
    pub scale: f64,
}

fn row_dot(row: &CVec, v: &CVec) -> C {
    (row.transpose() * v)[(0, 0)]
}

/// `S_{y z_j}(phi)` for `j` in `(z1, conj z1, z2)`.
pub fn s_operator(cv: &CoeffVectors, j: usize, phi: &ExpPoly) -> CVec {
    let p0 = phi.eval(0.0);
    let pm = phi.eval(-1.0);
    (0..2).fold(CVec::zeros(), |acc, i| acc + cv.y0[j][i] * p0[i] + cv.ym1[j][i] * pm[i])
}

/// Combines coefficient vectors and corrections into the normal form.
pub fn assemble(cv: &CoeffVectors, h: &HFunctions, eb: &EigenBasis, lp: &LinearPart) -> NormalFormCoeffs {
    let lpi = eb.l * PI;
    let s = 1.0 / lpi.sqrt();
    let psi1 = eb.psi1.eval(0.0);
    let psi1b = psi1.map(|z| z.conj());
    let psi2 = eb.psi2.eval(0.0);
    let f11 = |v: &CVec| row_dot(&psi1, v) * s;
    let f12 = |v: &CVec| row_dot(&psi1b, v) * s;
    let f13 = |v: &CVec| row_dot(&psi2, v) * s;
    let pr = Projections {
        f11_200: f11(&cv.f200),
        f11_110: f11(&cv.f110),
        f11_020: f11(&cv.f020),
        f11_002: f11(&cv.f002),
        f12_200: f12(&cv.f200),
        f12_110: f12(&cv.f110),
        f12_002: f12(&cv.f002),
        f13_101: f13(&cv.f101),
        f13_011: f13(&cv.f011),
        f11_210: row_dot(&psi1, &cv.f210) / lpi,
        f11_102: row_dot(&psi1, &cv.f102) / lpi,
        f13_111: row_dot(&psi2, &cv.f111) / lpi,
        f13_003: row_dot(&psi2, &cv.f003) * (1.5 / lpi),
    };
    let k = c(3.0) / C::new(0.0, 2.0 * eb.omega);
    let (z1, z1b, z2) = (0, 1, 2);
    let g210 = pr.f11_210
        + k * (-pr.f11_110 * pr.f11_200 + pr.f11_110 * pr.f12_110 + pr.f11_020 * pr.f12_200 * (2.0 / 3.0))
        + row_dot(&psi1, &(s_operator(cv, z1, &h.h110) + s_operator(cv, z1b, &h.h200))) * 1.5;
    let g102 = pr.f11_102
        + k * (-pr.f11_002 * pr.f11_200 * 2.0 + pr.f12_002 * pr.f11_110 + pr.f11_002 * pr.f13_101 * 2.0)
        + row_dot(&psi1, &(s_operator(cv, z1, &h.h002_0) + s_operator(cv, z2, &h.h101))) * 1.5;
    let g111 = pr.f13_111
        + k * (-pr.f13_101 * pr.f11_110 + pr.f13_011 * pr.f12_110)
        + row_dot(
            &psi2,
            &(s_operator(cv, z1, &h.h011) + s_operator(cv, z1b, &h.h101) + s_operator(cv, z2, &h.h110)),
        ) * 1.5;
    let g003 = pr.f13_003
        + k * (-pr.f11_002 * pr.f13_101 + pr.f12_002 * pr.f13_011)
        + row_dot(&psi2, &s_operator(cv, z2, &h.h002_n2)) * 1.5;
    NormalFormCoeffs {
        f11_alpha: cv.alpha_z1.map(|v| row_dot(&psi1, &v)),
        f13_alpha: cv.alpha_z2.map(|v| row_dot(&psi2, &v)),
        g210,
        g102,
        g111,
        g003,
        projections: pr,
        omega: eb.omega,
        n2: eb.n2,
        l: eb.l,
        scale: lp.scale(eb.n2, eb.l),
    }
}

/// Everything produced by the normal-form stage.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalForm {
    pub vectors: CoeffVectors,
    pub h: HFunctions,
    pub coeffs: NormalFormCoeffs,
}

pub fn normal_form(bundle: &DerivativeBundle, eb: &EigenBasis) -> Result<NormalForm, NormalFormError> {
    let vectors = coeff_vectors(bundle, eb);
    let h = h_functions(&vectors, eb, &bundle.linear)?;
    let coeffs = assemble(&vectors, &h, eb, &bundle.linear);
    Ok(NormalForm { vectors, h, coeffs })
}
