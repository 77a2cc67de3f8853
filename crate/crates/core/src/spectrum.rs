//! Characteristic equation of the linearized problem, Turing-Hopf point
//! location and numerical spectrum certification.
//!
//! For cosine mode `n` on `(0, l*pi)` with unit delay the characteristic
//! function is `det(lambda I + (n/l)^2 D - A - B exp(-lambda))`.
//! Certification counts zeros in a half-strip rectangle with the argument
//! principle; modes beyond an explicit bound cannot have roots with
//! `Re lambda >= -delta`.

use nalgebra::{Matrix2, Matrix3, Vector3};
use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{inf_norm, LinearPart, Linearizer, ModelError, ModelSpec, Mu};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("no Turing-Hopf point found in the search box")]
    NoBifurcationFound,
    #[error("mode {mode} has {count} roots with Re >= -delta, expected {expected}")]
    CertificationFailed { mode: u32, count: i64, expected: i64 },
    #[error("transversality fails: {which} = {value}")]
    TransversalityFailed { which: &'static str, value: f64 },
    #[error("degenerate point: {0}")]
    DegeneratePoint(String),
    #[error("critical root at mode {mode} is not simple (|dDelta/dlambda| = {value})")]
    SimpleRootViolation { mode: u32, value: f64 },
    #[error("contour passes through a zero of mode {mode}")]
    ContourThroughZero { mode: u32 },
    #[error("tail bound needs modes up to {needed}, only {n_max} allowed")]
    InconclusiveTailBound { n_max: u32, needed: u32 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Search settings; all fields have defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// `[[mu1_lo, mu1_hi], [mu2_lo, mu2_hi]]`; defaults to base values +-50%.
    #[serde(rename = "box")]
    pub bounds: Option<[[f64; 2]; 2]>,
    /// Largest Turing mode considered.
    pub n_max: u32,
    /// Largest mode inspected by certification; derived from the tail bound when absent.
    pub cert_n_max: Option<u32>,
    /// Half-strip margin: roots with `Re >= -delta` are counted.
    pub delta: f64,
    /// Seed grid resolution per parameter axis.
    pub grid: usize,
    /// Scaled residual required of a located point.
    pub tol: f64,
    /// Extra Newton starts `[omega, mu1, mu2]` (unit-delay frequency).
    pub guesses: Vec<[f64; 3]>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            bounds: None,
            n_max: 10,
            cert_n_max: None,
            delta: 1e-4,
            grid: 48,
            tol: 1e-9,
            guesses: Vec::new(),
        }
    }
}

impl SearchConfig {
    pub fn bounds_around(&self, base: Mu) -> [[f64; 2]; 2] {
        self.bounds.unwrap_or_else(|| {
            base.map(|b| {
                let h = if b == 0.0 { 0.5 } else { 0.5 * b.abs() };
                [b - h, b + h]
            })
        })
    }
}

fn cplx(m: &Matrix2<f64>) -> Matrix2<C> {
    m.map(|x| C::new(x, 0.0))
}

fn det(m: &Matrix2<C>) -> C {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

fn adj_trace(m: &Matrix2<C>, dm: &Matrix2<C>) -> C {
    m[(1, 1)] * dm[(0, 0)] - m[(0, 1)] * dm[(1, 0)] - m[(1, 0)] * dm[(0, 1)] + m[(0, 0)] * dm[(1, 1)]
}

fn kappa(n: u32, l: f64) -> f64 {
    (n as f64 / l).powi(2)
}

/// `lambda I + (n/l)^2 D - A - B exp(-lambda)`.
pub fn char_matrix(lp: &LinearPart, n: u32, l: f64, lambda: C) -> Matrix2<C> {
    let e = (-lambda).exp();
    Matrix2::identity() * lambda + cplx(&(lp.d * kappa(n, l) - lp.a)) - cplx(&lp.b) * e
}

pub fn char_value(lp: &LinearPart, n: u32, l: f64, lambda: C) -> C {
    det(&char_matrix(lp, n, l, lambda))
}

/// Derivative of the characteristic function in `lambda`.
pub fn char_derivative(lp: &LinearPart, n: u32, l: f64, lambda: C) -> C {
    let m = char_matrix(lp, n, l, lambda);
    let dm = Matrix2::identity() + cplx(&lp.b) * (-lambda).exp();
    adj_trace(&m, &dm)
}

/// Derivative of the characteristic function in parameter `p`.
pub fn char_param_derivative(lp: &LinearPart, n: u32, l: f64, lambda: C, p: usize) -> C {
    let m = char_matrix(lp, n, l, lambda);
    let dm = cplx(&(lp.dd[p] * kappa(n, l) - lp.da[p])) - cplx(&lp.db[p]) * (-lambda).exp();
    adj_trace(&m, &dm)
}

/// Characteristic function of one mode as a function of `(lambda, mu)`.
pub struct CharContext<'a> {
    pub lin: &'a Linearizer,
    pub n: u32,
    pub l: f64,
}

impl CharContext<'_> {
    pub fn value(&self, lambda: C, mu: Mu) -> Result<C, ModelError> {
        Ok(char_value(&self.lin.at(mu)?, self.n, self.l, lambda))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transversality {
    /// `Re dlambda/dmu1` at the Hopf pair.
    pub dalpha_dmu1: f64,
    /// `dlambda/dmu2` at the Turing zero.
    pub dgamma_dmu2: f64,
    /// Complex `dlambda/dmu_p` at `i omega` (mode 0).
    pub hopf: [[f64; 2]; 2],
    /// Real `dlambda/dmu_p` at 0 (mode n2).
    pub turing: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeCount {
    pub mode: u32,
    pub count: i64,
    /// Rectangle `[-delta, re_max] x [-im_max, im_max]` actually used.
    pub re_max: f64,
    pub im_max: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certification {
    pub delta: f64,
    pub modes: Vec<ModeCount>,
    /// Every mode at or above this index is excluded by the tail bound.
    pub tail_from: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub n2: u32,
    pub mu: Mu,
    pub omega: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuringHopfPoint {
    pub mu: Mu,
    /// Hopf frequency in unit-delay time.
    pub omega: f64,
    pub n1: u32,
    pub n2: u32,
    pub l: f64,
    /// Delay value that converts unit-delay time back to original time, if rescaled.
    pub time_scale: Option<f64>,
    /// Index of the delay parameter when the model was rescaled.
    pub time_scale_index: Option<usize>,
    pub residuals: [f64; 2],
    pub transversality: Transversality,
    pub certification: Certification,
    pub candidates: Vec<Candidate>,
}

impl TuringHopfPoint {
    /// Hopf frequency in the model's original time unit.
    pub fn omega_original(&self) -> f64 {
        self.omega / self.time_scale.unwrap_or(1.0)
    }

    /// Delay at parameter offset `alpha`, the unit of unit-delay time.
    pub fn delay_at(&self, alpha: [f64; 2]) -> f64 {
        match (self.time_scale, self.time_scale_index) {
            (Some(t), Some(i)) => t + alpha[i],
            _ => 1.0,
        }
    }
}

/// Smallest mode index from which no root with `Re >= -delta` can exist.
pub fn tail_bound(lp: &LinearPart, l: f64, delta: f64) -> u32 {
    let dmin = lp.d[(0, 0)].min(lp.d[(1, 1)]);
    let need = inf_norm(&lp.a) + delta.exp() * inf_norm(&lp.b) + delta;
    ((need / dmin).sqrt() * l).floor() as u32 + 1
}

/// Radius containing every root of mode `n` with `Re >= -delta`.
pub fn root_radius(lp: &LinearPart, n: u32, l: f64, delta: f64) -> f64 {
    inf_norm(&lp.a) + delta.exp() * inf_norm(&lp.b) + kappa(n, l) * inf_norm(&lp.d)
}

fn winding(lp: &LinearPart, n: u32, l: f64, rect: [f64; 3]) -> Result<f64, ()> {
    let [delta, re_max, im_max] = rect;
    let corners = [
        C::new(-delta, -im_max),
        C::new(re_max, -im_max),
        C::new(re_max, im_max),
        C::new(-delta, im_max),
    ];
    let floor = 1e-13 * lp.scale(n, l).powi(2);
    let f = |z: C| char_value(lp, n, l, z);
    let mut total = 0.0;
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        let pieces = (((b - a).norm() / 0.1).ceil() as usize).clamp(64, 200_000);
        let mut za = a;
        let mut fa = f(za);
        if fa.norm() < floor {
            return Err(());
        }
        for j in 1..=pieces {
            let zb = a + (b - a) * (j as f64 / pieces as f64);
            let fb = f(zb);
            total += segment_phase(&f, za, fa, zb, fb, floor, 0)?;
            za = zb;
            fa = fb;
        }
    }
    Ok(total / std::f64::consts::TAU)
}

fn segment_phase(
    f: &dyn Fn(C) -> C,
    za: C,
    fa: C,
    zb: C,
    fb: C,
    floor: f64,
    depth: u32,
) -> Result<f64, ()> {
    if fb.norm() < floor {
        return Err(());
    }
    let d = (fb / fa).arg();
    if d.abs() <= std::f64::consts::FRAC_PI_4 || depth >= 40 {
        return Ok(d);
    }
    let zm = (za + zb) * 0.5;
    let fm = f(zm);
    Ok(segment_phase(f, za, fa, zm, fm, floor, depth + 1)?
        + segment_phase(f, zm, fm, zb, fb, floor, depth + 1)?)
}

/// Counts zeros of mode `n` with `Re >= -delta` by the argument principle.
///
/// `im_max` defaults to the a-priori root radius. The contour is nudged when it
/// passes too close to a zero or the winding number is not near an integer.
pub fn count_roots(lp: &LinearPart, n: u32, l: f64, delta: f64, im_max: Option<f64>) -> Result<ModeCount, SpectrumError> {
    let r = root_radius(lp, n, l, delta);
    for attempt in 0..6 {
        let d = delta * (1.0 + 0.137 * attempt as f64);
        let re_max = 1.1 * r + 1.0 + 0.071 * attempt as f64;
        let im = im_max.unwrap_or(1.1 * r + 1.0) + 0.053 * attempt as f64;
        if let Ok(w) = winding(lp, n, l, [d, re_max, im]) {
            if (w - w.round()).abs() <= 0.25 {
                return Ok(ModeCount { mode: n, count: w.round() as i64, re_max, im_max: im, delta: d });
            }
        }
    }
    Err(SpectrumError::ContourThroughZero { mode: n })
}

/// Checks that mode 0 holds exactly the Hopf pair, mode `n2` exactly the
/// zero, and every other mode up to the tail bound holds no root with
/// `Re >= -delta`.
pub fn certify_spectrum(
    lp: &LinearPart,
    l: f64,
    n2: u32,
    delta: f64,
    n_max: Option<u32>,
    im_max: Option<f64>,
) -> Result<Certification, SpectrumError> {
    let tail = tail_bound(lp, l, delta);
    let needed = tail.saturating_sub(1).max(n2);
    let last = match n_max {
        Some(n) if n < needed => return Err(SpectrumError::InconclusiveTailBound { n_max: n, needed }),
        Some(n) => n,
        None => needed,
    };
    let modes: Vec<ModeCount> = (0..=last)
        .into_par_iter()
        .map(|n| count_roots(lp, n, l, delta, im_max))
        .collect::<Result<_, _>>()?;
    for mc in &modes {
        let expected = match mc.mode {
            0 => 2,
            n if n == n2 => 1,
            _ => 0,
        };
        if mc.count != expected {
            return Err(SpectrumError::CertificationFailed { mode: mc.mode, count: mc.count, expected });
        }
    }
    Ok(Certification { delta, modes, tail_from: tail })
}

/// Implicit derivatives of the critical roots with respect to both parameters.
pub fn transversality(lp: &LinearPart, l: f64, omega: f64, n2: u32) -> Result<Transversality, SpectrumError> {
    let iw = C::new(0.0, omega);
    let zero = C::new(0.0, 0.0);
    let check = |mode: u32, lambda: C| {
        let d = char_derivative(lp, mode, l, lambda);
        if d.norm() < 1e-9 * lp.scale(mode, l) {
            Err(SpectrumError::SimpleRootViolation { mode, value: d.norm() })
        } else {
            Ok(d)
        }
    };
    let dh = check(0, iw)?;
    let dt = check(n2, zero)?;
    let hopf = [0, 1].map(|p| -char_param_derivative(lp, 0, l, iw, p) / dh);
    let turing = [0, 1].map(|p| (-char_param_derivative(lp, n2, l, zero, p) / dt).re);
    Ok(Transversality {
        dalpha_dmu1: hopf[0].re,
        dgamma_dmu2: turing[1],
        hopf: hopf.map(|z| [z.re, z.im]),
        turing,
    })
}

/// Multi-start damped Newton search for zeros of mode `n` in `[-delta, re_max] x [-im_max, im_max]`.
pub fn find_roots(lp: &LinearPart, n: u32, l: f64, rect: [f64; 3], seeds_per_axis: usize) -> Vec<C> {
    let [delta, re_max, im_max] = rect;
    let tol = 1e-9;
    let mut roots: Vec<C> = Vec::new();
    let k = seeds_per_axis.max(2);
    for i in 0..k {
        for j in 0..k {
            let mut z = C::new(
                -delta + (re_max + delta) * i as f64 / (k - 1) as f64,
                -im_max + 2.0 * im_max * j as f64 / (k - 1) as f64,
            );
            let mut fz = char_value(lp, n, l, z);
            for _ in 0..100 {
                let step = fz / char_derivative(lp, n, l, z);
                if !step.is_finite() {
                    break;
                }
                let mut t = 1.0;
                let mut accepted = false;
                while t > 1e-4 {
                    let zn = z - step * t;
                    let fn_ = char_value(lp, n, l, zn);
                    if fn_.norm() < fz.norm() {
                        z = zn;
                        fz = fn_;
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
                if !accepted || (step * t).norm() < 1e-15 * (1.0 + z.norm()) {
                    break;
                }
            }
            let inside = z.re >= -delta && z.re <= re_max && z.im.abs() <= im_max;
            if inside && fz.norm() <= tol * (1.0 + z.norm_sqr()) && !roots.iter().any(|r| (r - z).norm() < 1e-6) {
                roots.push(z);
            }
        }
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    roots
}

/// Imaginary-axis crossings `omega in (0, omega_max]` of mode 0, with `Re Delta` there.
fn hopf_branches(lp: &LinearPart, l: f64) -> Vec<(f64, f64)> {
    let wmax = inf_norm(&lp.a) + inf_norm(&lp.b) + 1e-9;
    let samples = 400;
    let im = |w: f64| char_value(lp, 0, l, C::new(0.0, w)).im;
    let mut out = Vec::new();
    let mut w0 = wmax / samples as f64;
    let mut f0 = im(w0);
    for k in 2..=samples {
        let w1 = wmax * k as f64 / samples as f64;
        let f1 = im(w1);
        if f0 == 0.0 || f0.signum() != f1.signum() {
            let (mut a, mut b, mut fa) = (w0, w1, f0);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                let fm = im(m);
                if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            let w = 0.5 * (a + b);
            out.push((w, char_value(lp, 0, l, C::new(0.0, w)).re));
        }
        w0 = w1;
        f0 = f1;
    }
    out
}

struct GridPoint {
    branches: Vec<(f64, f64)>,
    turing: Vec<f64>,
}

fn newton_point(lin: &Linearizer, l: f64, n: u32, seed: [f64; 3]) -> Option<([f64; 3], f64)> {
    let scale = lin.at([seed[1], seed[2]]).ok()?.scale(n, l).powi(2);
    let eval = |x: &[f64; 3]| -> Option<Vector3<f64>> {
        let lp = lin.at([x[1], x[2]]).ok()?;
        let h = char_value(&lp, 0, l, C::new(0.0, x[0]));
        let t = char_value(&lp, n, l, C::new(0.0, 0.0));
        Some(Vector3::new(h.re, h.im, t.re) / scale)
    };
    let mut x = seed;
    let mut fx = eval(&x)?;
    for _ in 0..60 {
        if fx.norm() < 1e-15 {
            break;
        }
        let mut jac = Matrix3::zeros();
        for c in 0..3 {
            let h = 1e-6 * x[c].abs().max(1e-3);
            let mut xp = x;
            let mut xm = x;
            xp[c] += h;
            xm[c] -= h;
            let col = (eval(&xp)? - eval(&xm)?) / (2.0 * h);
            jac.set_column(c, &col);
        }
        let step = jac.lu().solve(&fx)?;
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-6 {
            let xn = [x[0] - t * step[0], x[1] - t * step[1], x[2] - t * step[2]];
            if let Some(fnew) = eval(&xn) {
                if fnew.norm() < fx.norm() {
                    x = xn;
                    fx = fnew;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved || t * step.norm() < 1e-15 * (1.0 + x[1].abs() + x[2].abs()) {
            break;
        }
    }
    Some((x, fx.norm()))
}

/// Locates and certifies a Turing-Hopf point of `m` (rescaled to unit delay if needed).
pub fn locate_turing_hopf(m: &ModelSpec, cfg: &SearchConfig) -> Result<TuringHopfPoint, SpectrumError> {
    let unit = m.unit_delay();
    let lin = unit.linearizer()?;
    let l = unit.l;
    let [[lo1, hi1], [lo2, hi2]] = cfg.bounds_around(m.base);
    let g = cfg.grid.max(4);
    let mu_at = |i: usize, j: usize| {
        [lo1 + (hi1 - lo1) * i as f64 / (g - 1) as f64, lo2 + (hi2 - lo2) * j as f64 / (g - 1) as f64]
    };

    let grid: Vec<Option<GridPoint>> = (0..g * g)
        .into_par_iter()
        .map(|idx| {
            let lp = lin.at(mu_at(idx / g, idx % g)).ok()?;
            Some(GridPoint {
                branches: hopf_branches(&lp, l),
                turing: (1..=cfg.n_max).map(|n| char_value(&lp, n, l, C::new(0.0, 0.0)).re).collect(),
            })
        })
        .collect();
    let at = |i: usize, j: usize| grid[i * g + j].as_ref();

    let mut seeds: Vec<(u32, [f64; 3])> = Vec::new();
    let changes = |vals: &[f64]| vals.iter().any(|v| *v > 0.0) && vals.iter().any(|v| *v <= 0.0);
    for i in 0..g - 1 {
        for j in 0..g - 1 {
            let Some(corners) = [at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1)]
                .into_iter()
                .collect::<Option<Vec<_>>>()
            else {
                continue;
            };
            for &(w, re) in &corners[0].branches {
                let mut res = vec![re];
                let mut ws = vec![w];
                for c in &corners[1..] {
                    if let Some(&(wc, rc)) = c
                        .branches
                        .iter()
                        .min_by(|a, b| (a.0 - w).abs().total_cmp(&(b.0 - w).abs()))
                        .filter(|(wc, _)| (wc - w).abs() <= 0.2 * w)
                    {
                        res.push(rc);
                        ws.push(wc);
                    }
                }
                if res.len() < 4 || !changes(&res) {
                    continue;
                }
                let w_mid = ws.iter().sum::<f64>() / 4.0;
                for n in 1..=cfg.n_max {
                    let near = (i.saturating_sub(1)..=(i + 1).min(g - 2)).any(|a| {
                        (j.saturating_sub(1)..=(j + 1).min(g - 2)).any(|b| {
                            let vals: Option<Vec<f64>> = [at(a, b), at(a + 1, b), at(a, b + 1), at(a + 1, b + 1)]
                                .into_iter()
                                .map(|p| p.map(|p| p.turing[n as usize - 1]))
                                .collect();
                            vals.is_some_and(|v| changes(&v))
                        })
                    });
                    if near {
                        let c = mu_at(i, j);
                        let d = mu_at(i + 1, j + 1);
                        seeds.push((n, [w_mid, 0.5 * (c[0] + d[0]), 0.5 * (c[1] + d[1])]));
                    }
                }
            }
        }
    }
    for guess in &cfg.guesses {
        for n in 1..=cfg.n_max {
            seeds.push((n, *guess));
        }
    }

    let span = [hi1 - lo1, hi2 - lo2];
    let mut solutions: Vec<(u32, [f64; 3])> = seeds
        .par_iter()
        .filter_map(|&(n, seed)| {
            let (x, res) = newton_point(&lin, l, n, seed)?;
            let inside = x[1] >= lo1 - 1e-9 * span[0]
                && x[1] <= hi1 + 1e-9 * span[0]
                && x[2] >= lo2 - 1e-9 * span[1]
                && x[2] <= hi2 + 1e-9 * span[1];
            (inside && x[0] > 1e-8 && res <= cfg.tol).then_some((n, x))
        })
        .collect();
    solutions.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1[1].total_cmp(&b.1[1]))
            .then(a.1[2].total_cmp(&b.1[2]))
            .then(a.1[0].total_cmp(&b.1[0]))
    });
    solutions.dedup_by(|a, b| {
        a.0 == b.0 && (0..3).all(|k| (a.1[k] - b.1[k]).abs() <= 1e-6 * (1.0 + b.1[k].abs()))
    });
    if solutions.is_empty() {
        return Err(SpectrumError::NoBifurcationFound);
    }

    let time_scale = unit.time_scale_param();
    let evaluated: Vec<Result<TuringHopfPoint, SpectrumError>> = solutions
        .par_iter()
        .map(|&(n2, x)| {
            let mu = [x[1], x[2]];
            let lp = lin.at(mu)?;
            let s2 = lp.scale(n2, l).powi(2);
            let zero = C::new(0.0, 0.0);
            if char_value(&lp, 0, l, zero).norm() <= 1e-9 * s2 {
                return Err(SpectrumError::DegeneratePoint("zero is also a root of mode 0".into()));
            }
            let residuals = [
                char_value(&lp, 0, l, C::new(0.0, x[0])).norm() / s2,
                char_value(&lp, n2, l, zero).norm() / s2,
            ];
            let tr = transversality(&lp, l, x[0], n2).map_err(|e| match e {
                SpectrumError::SimpleRootViolation { mode, .. } => {
                    SpectrumError::DegeneratePoint(format!("critical root of mode {mode} is not simple"))
                }
                e => e,
            })?;
            let certification = certify_spectrum(&lp, l, n2, cfg.delta, cfg.cert_n_max, None)?;
            if tr.dalpha_dmu1.abs() <= 1e-6 {
                return Err(SpectrumError::TransversalityFailed { which: "dalpha/dmu1", value: tr.dalpha_dmu1 });
            }
            if tr.dgamma_dmu2.abs() <= 1e-6 {
                return Err(SpectrumError::TransversalityFailed { which: "dgamma/dmu2", value: tr.dgamma_dmu2 });
            }
            Ok(TuringHopfPoint {
                mu,
                omega: x[0],
                n1: 0,
                n2,
                l,
                time_scale: time_scale.map(|p| mu[p]),
                time_scale_index: time_scale,
                residuals,
                transversality: tr,
                certification,
                candidates: Vec::new(),
            })
        })
        .collect();

    let candidates: Vec<Candidate> = solutions
        .iter()
        .zip(&evaluated)
        .map(|(&(n2, x), r)| Candidate {
            n2,
            mu: [x[1], x[2]],
            omega: x[0],
            status: match r {
                Ok(_) => "certified".into(),
                Err(e) => e.to_string(),
            },
        })
        .collect();

    let base = m.base;
    let distance = |p: &TuringHopfPoint| {
        ((p.mu[0] - base[0]) / span[0]).powi(2) + ((p.mu[1] - base[1]) / span[1]).powi(2)
    };
    let mut best: Option<TuringHopfPoint> = None;
    let mut first_error = None;
    for r in evaluated {
        match r {
            Ok(p) => {
                let better = match &best {
                    None => true,
                    Some(b) => p.n2 < b.n2 || (p.n2 == b.n2 && distance(&p) < distance(b)),
                };
                if better {
                    best = Some(p);
                }
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    match best {
        Some(mut p) => {
            p.candidates = candidates;
            Ok(p)
        }
        None => Err(first_error.unwrap_or(SpectrumError::NoBifurcationFound)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::load_model;
    use crate::HOLLING_TANNER;

    const TAU0: f64 = 0.456_723_24;
    const R0: f64 = 2.864_581_52;
    const OMEGA0: f64 = 1.319_882_66;

    fn ht() -> ModelSpec {
        load_model(HOLLING_TANNER).unwrap()
    }

    #[test]
    fn characteristic_values_at_the_point() {
        let m = ht().unit_delay();
        let lp = m.linear_part([TAU0, R0]).unwrap();
        let s = lp.scale(5, 5.0).powi(2);
        assert!(char_value(&lp, 5, 5.0, C::new(0.0, 0.0)).norm() <= 1e-6 * s);
        assert!(char_value(&lp, 0, 5.0, C::new(0.0, TAU0 * 2.8899)).norm() <= 1e-4 * s);
        assert!(char_value(&lp, 0, 5.0, C::new(0.0, OMEGA0)).norm() <= 1e-7 * s);
        // n = 0, lambda = 0: tau^2 r 0.4673.
        let v = char_value(&lp, 0, 5.0, C::new(0.0, 0.0));
        assert!((v.re - TAU0 * TAU0 * R0 * 0.4673).abs() < 1e-4, "{v}");
    }

    #[test]
    fn conjugate_symmetry() {
        let lp = ht().unit_delay().linear_part([0.3, 2.0]).unwrap();
        for z in [C::new(0.3, 1.7), C::new(-0.2, -4.0), C::new(2.0, 0.5)] {
            for n in [0, 3, 7] {
                assert_eq!(char_value(&lp, n, 5.0, z.conj()), char_value(&lp, n, 5.0, z).conj());
            }
        }
    }

    #[test]
    fn lambda_derivative_matches_difference() {
        let lp = ht().unit_delay().linear_part([TAU0, R0]).unwrap();
        let z = C::new(0.1, 1.2);
        let h = 1e-6;
        let fd = (char_value(&lp, 2, 5.0, z + h) - char_value(&lp, 2, 5.0, z - h)) / (2.0 * h);
        assert!((char_derivative(&lp, 2, 5.0, z) - fd).norm() < 1e-7);
    }

    #[test]
    fn pure_diffusion_modes_are_stable() {
        let m = ModelSpec::from_parts(
            crate::expr::Expr::num(0.0),
            crate::expr::Expr::num(0.0),
            [crate::expr::Expr::num(1.0), crate::expr::Expr::num(2.0)],
            1.0,
            ["p", "q"],
            [1.0, 1.0],
        )
        .unwrap();
        let lp = m.linear_part([1.0, 1.0]).unwrap();
        for n in 1..6 {
            assert_eq!(count_roots(&lp, n, 1.0, 0.5, None).unwrap().count, 0);
        }
        // Mode 0 has the double root at zero.
        assert_eq!(count_roots(&lp, 0, 1.0, 0.5, None).unwrap().count, 2);
    }

    #[test]
    fn turing_line_is_affine_in_r() {
        // Delta_5(0) = 0 at r = 1.625/0.5673 (rounded coefficients).
        let m = ht();
        let lp = m.linear_part([TAU0, 2.8646]).unwrap();
        // det([[0.1 - a00, -a01], [-r, 10 + r]]) = 0 solved for r.
        let p = 0.1 - lp.a[(0, 0)];
        let r_line = -10.0 * p / (p - lp.a[(0, 1)]);
        assert!((r_line - R0).abs() < 1e-6, "{r_line}");
        assert!((1.625 / 0.5673 - R0).abs() < 1e-3);
    }
}
