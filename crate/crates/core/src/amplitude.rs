//! Planar amplitude system, its equilibria and attractor predictions.
//!
//! With `z1 = rho e^{i theta}` and a rescaling of `rho`, `z2` and time, the
//! normal form reduces to
//!
//! ```text
//! r' = r (eps1 + r^2 + b v^2)
//! v' = v (eps2 + c r^2 + d v^2)
//! ```
//!
//! The time rescaling carries the factor `eps = sign(Re g210)`. When it is
//! negative the planar flow runs backwards, so every stability label reported
//! here is converted back to the original time direction.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::eigenbasis::EigenBasis;
use crate::normalform::NormalFormCoeffs;
use crate::spectrum::TuringHopfPoint;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmplitudeError {
    #[error("degenerate cubic coefficient: {0}")]
    DegenerateCubic(&'static str),
    #[error("boundary case: {0} vanishes")]
    BoundaryCase(&'static str),
    #[error("no catalogued attractor for stable set {0}")]
    OutsideCatalog(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplitudeSystem {
    /// Time-orientation sign, `sign(Re g210)`.
    pub epsilon: f64,
    /// `eps1 = eps1[0] a1 + eps1[1] a2`.
    pub eps1: [f64; 2],
    pub eps2: [f64; 2],
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub d_minus_bc: f64,
    #[serde(serialize_with = "crate::cser::one")]
    pub g210: C,
    #[serde(serialize_with = "crate::cser::one")]
    pub g102: C,
    pub g111: f64,
    pub g003: f64,
    #[serde(serialize_with = "crate::cser::many")]
    pub f11_alpha: [C; 2],
    /// Hopf frequency in unit-delay time.
    pub omega0: f64,
}

pub fn to_amplitude(nf: &NormalFormCoeffs) -> Result<AmplitudeSystem, AmplitudeError> {
    let tol = 1e-10 * nf.scale;
    let re210 = nf.g210.re;
    let g003 = nf.g003.re;
    if re210.abs() <= tol {
        return Err(AmplitudeError::DegenerateCubic("Re g210"));
    }
    if g003.abs() <= tol {
        return Err(AmplitudeError::DegenerateCubic("g003"));
    }
    let eps = re210.signum();
    let b = eps * nf.g102.re / g003.abs();
    let c = eps * nf.g111.re / re210.abs();
    let d = eps * g003.signum();
    Ok(AmplitudeSystem {
        epsilon: eps,
        eps1: nf.f11_alpha.map(|f| 0.5 * eps * f.re),
        eps2: nf.f13_alpha.map(|f| 0.5 * eps * f.re),
        b,
        c,
        d,
        d_minus_bc: d - b * c,
        g210: nf.g210,
        g102: nf.g102,
        g111: nf.g111.re,
        g003,
        f11_alpha: nf.f11_alpha,
        omega0: nf.omega,
    })
}

impl AmplitudeSystem {
    pub fn unfolding(&self, alpha: [f64; 2]) -> (f64, f64) {
        (
            self.eps1[0] * alpha[0] + self.eps1[1] * alpha[1],
            self.eps2[0] * alpha[0] + self.eps2[1] * alpha[1],
        )
    }

    /// Unit `alpha` direction mapped to the `(eps1, eps2)` direction `e`,
    /// or `e` itself when the unfolding map is singular.
    pub fn alpha_direction(&self, e: [f64; 2]) -> [f64; 2] {
        let det = self.eps1[0] * self.eps2[1] - self.eps1[1] * self.eps2[0];
        let a = if det.abs() > 1e-300 {
            [(self.eps2[1] * e[0] - self.eps1[1] * e[1]) / det, (self.eps1[0] * e[1] - self.eps2[0] * e[0]) / det]
        } else {
            e
        };
        let n = a[0].hypot(a[1]);
        [a[0] / n, a[1] / n]
    }

    /// Right-hand side of the planar system.
    pub fn field(&self, alpha: [f64; 2], r: f64, v: f64) -> [f64; 2] {
        let (e1, e2) = self.unfolding(alpha);
        [r * (e1 + r * r + self.b * v * v), v * (e2 + self.c * r * r + self.d * v * v)]
    }

    pub fn jacobian(&self, alpha: [f64; 2], r: f64, v: f64) -> [[f64; 2]; 2] {
        let (e1, e2) = self.unfolding(alpha);
        [
            [e1 + 3.0 * r * r + self.b * v * v, 2.0 * self.b * r * v],
            [2.0 * self.c * r * v, e2 + self.c * r * r + 3.0 * self.d * v * v],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum EquilibriumId {
    E1,
    E2,
    E3,
    E4,
}

impl EquilibriumId {
    pub const ALL: [EquilibriumId; 4] = [EquilibriumId::E1, EquilibriumId::E2, EquilibriumId::E3, EquilibriumId::E4];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stability {
    Stable,
    Unstable,
    Saddle,
    /// A zero real eigenvalue.
    Critical,
    /// A purely imaginary pair.
    HopfCritical,
}

impl Stability {
    fn reversed(self) -> Stability {
        match self {
            Stability::Stable => Stability::Unstable,
            Stability::Unstable => Stability::Stable,
            s => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub id: EquilibriumId,
    pub exists: bool,
    pub r: f64,
    pub v: f64,
    pub jacobian: [[f64; 2]; 2],
    /// Eigenvalues as `[re, im]` pairs.
    pub eigenvalues: [[f64; 2]; 2],
    /// Stability of the planar flow.
    pub planar: Stability,
    /// Stability in the original time direction.
    pub stability: Stability,
}

const CRITICAL_TOL: f64 = 1e-13;

fn eigen2(j: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc >= 0.0 {
        let s = disc.sqrt();
        [[tr / 2.0 + s, 0.0], [tr / 2.0 - s, 0.0]]
    } else {
        let s = (-disc).sqrt();
        [[tr / 2.0, s], [tr / 2.0, -s]]
    }
}

fn classify(ev: &[[f64; 2]; 2], tol: f64) -> Stability {
    let re = [ev[0][0], ev[1][0]];
    if re.iter().any(|x| x.abs() <= tol) {
        if ev[0][1] != 0.0 {
            Stability::HopfCritical
        } else {
            Stability::Critical
        }
    } else if re.iter().all(|x| *x < 0.0) {
        Stability::Stable
    } else if re.iter().all(|x| *x > 0.0) {
        Stability::Unstable
    } else {
        Stability::Saddle
    }
}

/// The four equilibria with `r, v >= 0`; mirror images `v -> -v` are implied.
pub fn equilibria(amp: &AmplitudeSystem, alpha: [f64; 2]) -> [Equilibrium; 4] {
    let (e1, e2) = amp.unfolding(alpha);
    let (b, c, d, dbc) = (amp.b, amp.c, amp.d, amp.d_minus_bc);
    let rad = |x: f64| (x > 0.0).then(|| x.sqrt());
    let coords = [
        Some((0.0, 0.0)),
        rad(-e1).map(|r| (r, 0.0)),
        rad(-e2 / d).map(|v| (0.0, v)),
        rad((b * e2 - d * e1) / dbc).zip(rad((c * e1 - e2) / dbc)),
    ];
    let tol = CRITICAL_TOL * (1.0 + e1.abs() + e2.abs());
    EquilibriumId::ALL.map(|id| {
        let at = coords[id as usize];
        let (r, v) = at.unwrap_or((0.0, 0.0));
        let jacobian = amp.jacobian(alpha, r, v);
        let eigenvalues = eigen2(&jacobian);
        let planar = classify(&eigenvalues, tol);
        let stability = if amp.epsilon < 0.0 { planar.reversed() } else { planar };
        Equilibrium { id, exists: at.is_some(), r, v, jacobian, eigenvalues, planar, stability }
    })
}

/// Unfolding type from the signs of `b`, `c`, `d` and `d - bc`.
pub fn classify_unfolding(amp: &AmplitudeSystem) -> Result<&'static str, AmplitudeError> {
    let tol = 1e-9;
    if amp.b.abs() <= tol {
        return Err(AmplitudeError::BoundaryCase("b"));
    }
    if amp.c.abs() <= tol {
        return Err(AmplitudeError::BoundaryCase("c"));
    }
    if amp.d_minus_bc.abs() <= tol {
        return Err(AmplitudeError::BoundaryCase("d - bc"));
    }
    let (b, c, a) = (amp.b > 0.0, amp.c > 0.0, amp.d_minus_bc > 0.0);
    Ok(if amp.d > 0.0 {
        match (b, c, a) {
            (true, true, true) => "Ia",
            (true, true, false) => "Ib",
            (true, false, _) => "II",
            (false, true, _) => "III",
            (false, false, true) => "IVa",
            (false, false, false) => "IVb",
        }
    } else {
        match (b, c, a) {
            (true, true, _) => "V",
            (true, false, true) => "VIa",
            (true, false, false) => "VIb",
            (false, true, true) => "VIIa",
            (false, true, false) => "VIIb",
            (false, false, _) => "VIII",
        }
    })
}

/// Qualitative dynamics at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Signature {
    pub exists: [bool; 4],
    /// Stable in original time.
    pub stable: [bool; 4],
    /// `E4` is a focus on the side where a surrounding planar cycle attracts.
    pub cycle: bool,
}

impl Signature {
    pub fn describe(&self) -> String {
        let names = |mask: &[bool; 4]| {
            EquilibriumId::ALL
                .iter()
                .zip(mask)
                .filter(|(_, m)| **m)
                .map(|(id, _)| format!("{id:?}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = format!("exists {{{}}} stable {{{}}}", names(&self.exists), names(&self.stable));
        if self.cycle {
            s.push_str(" cycle");
        }
        s
    }
}

pub fn signature(amp: &AmplitudeSystem, alpha: [f64; 2]) -> Signature {
    let eq = equilibria(amp, alpha);
    let e4 = &eq[3];
    let det = e4.jacobian[0][0] * e4.jacobian[1][1] - e4.jacobian[0][1] * e4.jacobian[1][0];
    Signature {
        exists: eq.each_ref().map(|e| e.exists),
        stable: eq.each_ref().map(|e| e.exists && e.stability == Stability::Stable),
        cycle: amp.d < 0.0 && e4.exists && det > 0.0 && e4.stability == Stability::Unstable,
    }
}

/// A half-line `{t (cos angle, sin angle), t >= 0}` in the `alpha` plane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ray {
    pub name: String,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    pub label: String,
    pub signature: Signature,
    pub description: String,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionMap {
    pub rect: [[f64; 2]; 2],
    pub resolution: usize,
    /// Region index per cell, row-major with `alpha1` varying fastest.
    pub cells: Vec<usize>,
    pub regions: Vec<Region>,
    pub rays: Vec<Ray>,
}

fn lines(amp: &AmplitudeSystem) -> Vec<(String, [f64; 2])> {
    let (b, c, d) = (amp.b, amp.c, amp.d);
    let comb = |p: f64, q: f64| [p * amp.eps1[0] + q * amp.eps2[0], p * amp.eps1[1] + q * amp.eps2[1]];
    let mut out = vec![
        ("eps1 = 0".to_string(), amp.eps1),
        ("eps2 = 0".to_string(), amp.eps2),
        ("c eps1 - eps2 = 0".to_string(), comb(c, -1.0)),
        ("b eps2 - d eps1 = 0".to_string(), comb(-d, b)),
    ];
    if d < 0.0 {
        // Trace of the E4 Jacobian, 2 (r^2 + d v^2), vanishes here.
        out.push(("E4 Hopf".to_string(), comb(d * c - d, b - d)));
    }
    out
}

/// Critical half-lines through the origin, sorted by angle.
pub fn critical_rays(amp: &AmplitudeSystem) -> Vec<Ray> {
    let mut rays = Vec::new();
    for (name, n) in lines(amp) {
        if n[0] == 0.0 && n[1] == 0.0 {
            continue;
        }
        for sgn in [1.0, -1.0] {
            let dir = [-n[1] * sgn, n[0] * sgn];
            if name == "E4 Hopf" {
                let probe = [dir[0] * 1e-3, dir[1] * 1e-3];
                if !equilibria(amp, probe)[3].exists {
                    continue;
                }
            }
            let mut angle = dir[1].atan2(dir[0]).rem_euclid(std::f64::consts::TAU);
            if angle >= std::f64::consts::TAU - 1e-12 {
                angle = 0.0;
            }
            rays.push(Ray { name: name.clone(), angle });
        }
    }
    rays.sort_by(|a, b| a.angle.total_cmp(&b.angle));
    rays
}

/// Classifies every cell center of a `resolution x resolution` grid over `rect`.
///
/// Regions are labeled `D1, D2, ...` counterclockwise in the `(eps1, eps2)`
/// plane, starting from the positive `eps2` axis.
pub fn region_map(amp: &AmplitudeSystem, rect: [[f64; 2]; 2], resolution: usize) -> RegionMap {
    let n = resolution.max(2);
    let at = |i: usize, lo: f64, hi: f64| lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
    let sigs: Vec<Signature> = (0..n * n)
        .into_par_iter()
        .map(|k| signature(amp, [at(k % n, rect[0][0], rect[0][1]), at(k / n, rect[1][0], rect[1][1])]))
        .collect();

    let half = 0.45 * (rect[0][1] - rect[0][0]).min(rect[1][1] - rect[1][0]);
    let center = [0.5 * (rect[0][0] + rect[0][1]), 0.5 * (rect[1][0] + rect[1][1])];
    let mut order: Vec<Signature> = Vec::new();
    for k in 0..7200 {
        let t = std::f64::consts::FRAC_PI_2 + std::f64::consts::TAU * k as f64 / 7200.0;
        let dir = amp.alpha_direction([t.cos(), t.sin()]);
        let s = signature(amp, [center[0] + half * dir[0], center[1] + half * dir[1]]);
        if !order.contains(&s) && sigs.contains(&s) {
            order.push(s);
        }
    }
    for s in &sigs {
        if !order.contains(s) {
            order.push(*s);
        }
    }
    let index: BTreeMap<Signature, usize> = order.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let cells: Vec<usize> = sigs.iter().map(|s| index[s]).collect();
    let regions = order
        .iter()
        .enumerate()
        .map(|(i, s)| Region {
            label: format!("D{}", i + 1),
            signature: *s,
            description: s.describe(),
            cells: cells.iter().filter(|c| **c == i).count(),
        })
        .collect();
    RegionMap { rect, resolution: n, cells, regions, rays: critical_rays(amp) }
}

impl RegionMap {
    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        let n = self.resolution as f64;
        [
            self.rect[0][0] + (self.rect[0][1] - self.rect[0][0]) * (i as f64 + 0.5) / n,
            self.rect[1][0] + (self.rect[1][1] - self.rect[1][0]) * (j as f64 + 0.5) / n,
        ]
    }

    pub fn region_at(&self, alpha: [f64; 2]) -> Option<&Region> {
        let n = self.resolution;
        let fi = (alpha[0] - self.rect[0][0]) / (self.rect[0][1] - self.rect[0][0]) * n as f64;
        let fj = (alpha[1] - self.rect[1][0]) / (self.rect[1][1] - self.rect[1][0]) * n as f64;
        if !(0.0..n as f64).contains(&fi) || !(0.0..n as f64).contains(&fj) {
            return None;
        }
        self.regions.get(self.cells[fj as usize * n + fi as usize])
    }

    /// `alpha1,alpha2,region` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha1,alpha2,region\n");
        let n = self.resolution;
        for j in 0..n {
            for i in 0..n {
                let a = self.cell_center(i, j);
                let _ = writeln!(s, "{:.17e},{:.17e},{}", a[0], a[1], self.regions[self.cells[j * n + i]].label);
            }
        }
        s
    }

    /// Each ray as a two-point polyline clipped to the map rectangle.
    pub fn rays_csv(&self) -> String {
        let mut s = String::from("ray,name,alpha1,alpha2\n");
        for (k, ray) in self.rays.iter().enumerate() {
            let (c, sn) = (ray.angle.cos(), ray.angle.sin());
            let mut t = f64::INFINITY;
            for (dir, [lo, hi]) in [(c, self.rect[0]), (sn, self.rect[1])] {
                if dir > 0.0 {
                    t = t.min(hi / dir);
                } else if dir < 0.0 {
                    t = t.min(lo / dir);
                }
            }
            let _ = writeln!(s, "{k},{},0,0", ray.name);
            let _ = writeln!(s, "{k},{},{:.17e},{:.17e}", ray.name, t * c, t * sn);
        }
        s
    }

    /// A gnuplot script drawing the map and rays from the two CSV files.
    pub fn plot_script(&self, map_csv: &str, rays_csv: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "set datafile separator ','");
        let _ = writeln!(s, "set xlabel 'alpha1'\nset ylabel 'alpha2'");
        let _ = writeln!(s, "set xrange [{}:{}]\nset yrange [{}:{}]", self.rect[0][0], self.rect[0][1], self.rect[1][0], self.rect[1][1]);
        for (i, r) in self.regions.iter().enumerate() {
            let _ = writeln!(s, "# {} = {}", r.label, r.description);
            let _ = writeln!(s, "region{} = '{}'", i + 1, r.label);
        }
        let _ = writeln!(
            s,
            "plot '{map_csv}' every ::1 using 1:2:(int(substr(strcol(3),2,3))) with points pt 5 ps 0.3 lc variable notitle, \\\n     '{rays_csv}' every ::1 using 3:4 with lines lw 2 lc rgb 'black' title 'critical rays'"
        );
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttractorKind {
    ConstantSteady,
    HomogeneousPeriodic,
    NonconstantSteady,
    InhomogeneousPeriodic,
    QuasiPeriodic,
}

/// One predicted attractor with its leading-order waveform.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attractor {
    pub case: u8,
    pub kind: AttractorKind,
    pub multiplicity: u8,
    /// Spatial cosine mode carrying the pattern, if any.
    pub spatial_mode: Option<u32>,
    /// Amplitude of the Hopf coordinate `z1`.
    pub rho: Option<f64>,
    /// Amplitude of the pattern, `|z2| phi2(0)`.
    pub h: Option<[f64; 2]>,
    /// Temporal frequency in unit-delay time.
    pub omega: Option<f64>,
    /// Temporal frequency in original time, using the delay at this `alpha`.
    pub omega_original: Option<f64>,
    /// Temporal frequency divided by the delay at the bifurcation point.
    pub omega_original_base: Option<f64>,
    /// Secondary frequency of a quasi-periodic solution, unit-delay time.
    pub varpi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractorPrediction {
    pub alpha: [f64; 2],
    pub eps: [f64; 2],
    pub region: String,
    pub signature: Signature,
    pub attractors: Vec<Attractor>,
}

/// Attractors at `alpha` with their waveform parameters.
///
/// `rho` sets the amplitude of the small planar cycle for quasi-periodic
/// solutions, which is not determined at this order.
pub fn predict_attractor(
    amp: &AmplitudeSystem,
    eb: &EigenBasis,
    p: &TuringHopfPoint,
    alpha: [f64; 2],
    rho: f64,
) -> Result<AttractorPrediction, AmplitudeError> {
    let (e1, e2) = amp.unfolding(alpha);
    let sig = signature(amp, alpha);
    let (b, c, d, dbc) = (amp.b, amp.c, amp.d, amp.d_minus_bc);
    let re210 = amp.g210.re.abs();
    let g003 = amp.g003.abs();
    let phi2 = [1.0, eb.k3.re];
    let shift = 0.5 * (amp.f11_alpha[0].im * alpha[0] + amp.f11_alpha[1].im * alpha[1]);
    let tau = p.delay_at(alpha);
    let tau0 = p.time_scale.unwrap_or(1.0);
    let blank = |case, kind, multiplicity| Attractor {
        case,
        kind,
        multiplicity,
        spatial_mode: None,
        rho: None,
        h: None,
        omega: None,
        omega_original: None,
        omega_original_base: None,
        varpi: None,
    };
    let with_omega = |mut a: Attractor, w: f64| {
        a.omega = Some(w);
        a.omega_original = Some(w / tau);
        a.omega_original_base = Some(w / tau0);
        a
    };
    let rho4 = (6.0 * (b * e2 - d * e1) / (dbc * re210)).sqrt();
    let h4 = (6.0 * (c * e1 - e2) / (dbc * g003)).sqrt();
    let omega4 = amp.omega0
        + shift
        + amp.g210.im * (b * e2 - d * e1) / (dbc * re210)
        + amp.g102.im * (c * e1 - e2) / (dbc * g003);

    let mut attractors = Vec::new();
    if sig.stable[0] {
        attractors.push(blank(1, AttractorKind::ConstantSteady, 1));
    }
    if sig.stable[1] {
        let mut a = blank(2, AttractorKind::HomogeneousPeriodic, 1);
        a.spatial_mode = Some(0);
        a.rho = Some((-6.0 * e1 / re210).sqrt());
        attractors.push(with_omega(a, amp.omega0 + shift - e1 * amp.g210.im / re210));
    }
    if sig.stable[2] {
        let mut a = blank(3, AttractorKind::NonconstantSteady, 2);
        let s = (-6.0 * e2 / (d * g003)).sqrt();
        a.spatial_mode = Some(p.n2);
        a.h = Some(phi2.map(|x| s * x));
        attractors.push(a);
    }
    if sig.stable[3] {
        let mut a = blank(4, AttractorKind::InhomogeneousPeriodic, 2);
        a.spatial_mode = Some(p.n2);
        a.rho = Some(rho4);
        a.h = Some(phi2.map(|x| h4 * x));
        attractors.push(with_omega(a, omega4));
    }
    if sig.cycle {
        let mut a = blank(5, AttractorKind::QuasiPeriodic, 2);
        a.spatial_mode = Some(p.n2);
        a.rho = Some(rho * (6.0 / re210).sqrt());
        a.h = Some(phi2.map(|x| rho4 * (6.0 / g003).sqrt() * x));
        a.varpi = Some(2.0 * ((b * e2 - d * e1) * (c * e1 - e2) / dbc).sqrt());
        attractors.push(with_omega(a, omega4));
    }
    if attractors.is_empty() {
        return Err(AmplitudeError::OutsideCatalog(sig.describe()));
    }
    Ok(AttractorPrediction { alpha, eps: [e1, e2], region: sig.describe(), signature: sig, attractors })
}
