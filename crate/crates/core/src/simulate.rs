//! Direct integration of the delayed reaction-diffusion system.
//!
//! The scheme treats diffusion by Crank-Nicolson on a uniform grid with
//! ghost-node Neumann closure and the reaction explicitly, reading delayed
//! values from a ring buffer of the last `m` states (`dt = tau / m`).

use std::f64::consts::PI;
use std::io::{self, Read, Write};

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::ExprError;
use crate::model::{ModelError, ModelSpec, Mu};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("solution blew up at t = {time} (step {step})")]
    BlowUp { time: f64, step: usize },
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("too few samples in the analysis window: {0} < 20")]
    TooFewSamples(usize),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    U,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Cos,
    Sin,
}

/// `amplitude * shape(mode * x / l)` added to one species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub species: Species,
    pub shape: Shape,
    pub mode: u32,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub points: usize,
    /// `m` with `dt = tau / m`; chosen from the reaction Jacobian when absent.
    pub steps_per_delay: Option<usize>,
    pub horizon: f64,
    /// Record every `stride` steps; defaults to `max(1, m / 2)`.
    pub stride: Option<usize>,
    pub perturbation: Vec<Perturbation>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { points: 256, steps_per_delay: None, horizon: 100.0, stride: None, perturbation: Vec::new() }
    }
}

impl SimConfig {
    pub fn negated(&self) -> SimConfig {
        let mut c = self.clone();
        for p in &mut c.perturbation {
            p.amplitude = -p.amplitude;
        }
        c
    }
}

/// Recorded solution on the grid, in absolute (unshifted) values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub mu: Mu,
    pub l: f64,
    pub x: Vec<f64>,
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// The homogeneous equilibrium the model was written around.
    pub equilibrium: [f64; 2],
    pub dt: f64,
    pub delay: f64,
    pub steps_per_delay: usize,
    pub stride: usize,
    pub config: SimConfig,
}

/// Tridiagonal system `(I - s Lap)` with ghost-node Neumann rows, pre-factored.
struct Implicit {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Implicit {
    fn new(n: usize, c: f64) -> Implicit {
        let mut lower = vec![-c; n];
        let mut upper = vec![-c; n];
        let diag = vec![1.0 + 2.0 * c; n];
        upper[0] = -2.0 * c;
        lower[n - 1] = -2.0 * c;
        lower[0] = 0.0;
        upper[n - 1] = 0.0;
        // Forward elimination factors, stored in place.
        let mut d = diag.clone();
        for i in 1..n {
            let w = lower[i] / d[i - 1];
            lower[i] = w;
            d[i] -= w * upper[i - 1];
        }
        Implicit { lower, diag: d, upper }
    }

    fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        for i in 1..n {
            rhs[i] -= self.lower[i] * rhs[i - 1];
        }
        rhs[n - 1] /= self.diag[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - self.upper[i] * rhs[i + 1]) / self.diag[i];
        }
    }
}

fn laplacian(w: &[f64], out: &mut [f64], inv_dx2: f64) {
    let n = w.len();
    out[0] = 2.0 * (w[1] - w[0]) * inv_dx2;
    out[n - 1] = 2.0 * (w[n - 2] - w[n - 1]) * inv_dx2;
    for i in 1..n - 1 {
        out[i] = (w[i + 1] - 2.0 * w[i] + w[i - 1]) * inv_dx2;
    }
}

/// Steps per delay chosen so that `dt <= 0.25 / (|A| + |B|)`, at least 10.
pub fn auto_steps_per_delay(m: &ModelSpec, mu: Mu) -> Result<usize, SimError> {
    let lp = m.linear_part(mu)?;
    let (na, nb) = lp.norms();
    let tau = m.delay_at(mu);
    Ok(((tau * (na + nb) / 0.25).ceil() as usize).max(10))
}

/// Integrates from the equilibrium plus the configured perturbation.
pub fn run(m: &ModelSpec, mu: Mu, cfg: &SimConfig) -> Result<Trajectory, SimError> {
    run_from(m, mu, cfg, None)
}

/// Integrates from explicit initial deviations `(u, v)` when given, otherwise
/// from the configured perturbation. The history on `[-tau, 0]` is constant.
pub fn run_from(m: &ModelSpec, mu: Mu, cfg: &SimConfig, initial: Option<(&[f64], &[f64])>) -> Result<Trajectory, SimError> {
    let n = cfg.points;
    if n < 64 {
        return Err(SimError::Config(format!("points = {n}, need at least 64")));
    }
    if !(cfg.horizon > 0.0) {
        return Err(SimError::Config("horizon must be positive".into()));
    }
    let tau = m.delay_at(mu);
    if !(tau > 0.0) {
        return Err(SimError::Config(format!("delay {tau} is not positive")));
    }
    let steps_per_delay = match cfg.steps_per_delay {
        Some(k) if k >= 1 => {
            let lp = m.linear_part(mu)?;
            let (na, nb) = lp.norms();
            if tau / k as f64 > 0.25 / (na + nb) {
                return Err(SimError::Config(format!(
                    "dt = {} exceeds the stability bound {}",
                    tau / k as f64,
                    0.25 / (na + nb)
                )));
            }
            k
        }
        Some(_) => return Err(SimError::Config("steps_per_delay must be at least 1".into())),
        None => auto_steps_per_delay(m, mu)?,
    };
    let dt = tau / steps_per_delay as f64;
    let stride = cfg.stride.unwrap_or((steps_per_delay / 2).max(1)).max(1);
    let steps = (cfg.horizon / dt).round() as usize;
    let len = m.l * PI;
    let dx = len / (n - 1) as f64;
    let x: Vec<f64> = (0..n).map(|i| i as f64 * dx).collect();

    let compiled = m.compiled()?;
    let [f, g, _, _] = &compiled;
    let [d1, d2] = m.diffusion(mu)?;
    let inv_dx2 = 1.0 / (dx * dx);
    let iu = Implicit::new(n, 0.5 * d1 * dt * inv_dx2);
    let iv = Implicit::new(n, 0.5 * d2 * dt * inv_dx2);

    let (mut u, mut v) = match initial {
        Some((u0, v0)) => {
            if u0.len() != n || v0.len() != n {
                return Err(SimError::Config(format!("initial data must have {n} points")));
            }
            (u0.to_vec(), v0.to_vec())
        }
        None => {
            let mut u = vec![0.0; n];
            let mut v = vec![0.0; n];
            for p in &cfg.perturbation {
                let target = match p.species {
                    Species::U => &mut u,
                    Species::V => &mut v,
                };
                for (t, xi) in target.iter_mut().zip(&x) {
                    let arg = p.mode as f64 * xi / m.l;
                    *t += p.amplitude * match p.shape {
                        Shape::Cos => arg.cos(),
                        Shape::Sin => arg.sin(),
                    };
                }
            }
            (u, v)
        }
    };

    let eq = m.shift;
    let mut tr = Trajectory {
        mu,
        l: m.l,
        x,
        times: Vec::with_capacity(steps / stride + 1),
        u: Vec::with_capacity(steps / stride + 1),
        v: Vec::with_capacity(steps / stride + 1),
        equilibrium: eq,
        dt,
        delay: tau,
        steps_per_delay,
        stride,
        config: cfg.clone(),
    };
    let record = |tr: &mut Trajectory, t: f64, u: &[f64], v: &[f64]| {
        tr.times.push(t);
        tr.u.push(u.iter().map(|w| w + eq[0]).collect());
        tr.v.push(v.iter().map(|w| w + eq[1]).collect());
    };
    record(&mut tr, 0.0, &u, &v);

    let mut hist_u = vec![u.clone(); steps_per_delay];
    let mut hist_v = vec![v.clone(); steps_per_delay];
    let mut lap = vec![0.0; n];
    let mut slots = [0.0, 0.0, 0.0, 0.0, mu[0], mu[1]];
    let mut fu = vec![0.0; n];
    let mut gv = vec![0.0; n];
    for k in 0..steps {
        let slot = k % steps_per_delay;
        {
            let (du, dv) = (&hist_u[slot], &hist_v[slot]);
            for i in 0..n {
                slots[0] = u[i];
                slots[1] = v[i];
                slots[2] = du[i];
                slots[3] = dv[i];
                fu[i] = f.eval(&slots);
                gv[i] = g.eval(&slots);
            }
        }
        hist_u[slot].copy_from_slice(&u);
        hist_v[slot].copy_from_slice(&v);
        for (w, react, d, solver) in [(&mut u, &fu, d1, &iu), (&mut v, &gv, d2, &iv)] {
            laplacian(w, &mut lap, inv_dx2);
            for i in 0..n {
                w[i] += dt * (0.5 * d * lap[i] + react[i]);
            }
            solver.solve(w);
        }
        if u.iter().chain(&v).any(|w| !(w.abs() <= 1e8)) {
            return Err(SimError::BlowUp { time: (k + 1) as f64 * dt, step: k + 1 });
        }
        if (k + 1) % stride == 0 {
            record(&mut tr, (k + 1) as f64 * dt, &u, &v);
        }
    }
    Ok(tr)
}

impl Trajectory {
    /// `t,x,u,v` rows, one per grid point per snapshot.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,u,v")?;
        for (k, t) in self.times.iter().enumerate() {
            for (i, x) in self.x.iter().enumerate() {
                writeln!(w, "{:.17e},{:.17e},{:.17e},{:.17e}", t, x, self.u[k][i], self.v[k][i])?;
            }
        }
        Ok(())
    }

    /// `THK1` framing: magic, then `N: u64`, `count: u64`, `dt: f64`,
    /// `stride: u64`, then per snapshot `t, u[N], v[N]`, all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(b"THK1")?;
        w.write_all(&(self.x.len() as u64).to_le_bytes())?;
        w.write_all(&(self.times.len() as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&(self.stride as u64).to_le_bytes())?;
        for (k, t) in self.times.iter().enumerate() {
            w.write_all(&t.to_le_bytes())?;
            for x in self.u[k].iter().chain(&self.v[k]) {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Snapshots decoded from the `THK1` framing.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryFrames {
    pub dt: f64,
    pub stride: usize,
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

pub fn read_binary<R: Read>(mut r: R) -> io::Result<BinaryFrames> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != b"THK1" {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad magic"));
    }
    let mut b8 = [0u8; 8];
    let mut next = |r: &mut R| -> io::Result<[u8; 8]> {
        r.read_exact(&mut b8)?;
        Ok(b8)
    };
    let n = u64::from_le_bytes(next(&mut r)?) as usize;
    let count = u64::from_le_bytes(next(&mut r)?) as usize;
    let dt = f64::from_le_bytes(next(&mut r)?);
    let stride = u64::from_le_bytes(next(&mut r)?) as usize;
    let mut out = BinaryFrames { dt, stride, times: Vec::new(), u: Vec::new(), v: Vec::new() };
    for _ in 0..count {
        out.times.push(f64::from_le_bytes(next(&mut r)?));
        let mut read_n = |r: &mut R| -> io::Result<Vec<f64>> {
            (0..n).map(|_| next(r).map(f64::from_le_bytes)).collect()
        };
        out.u.push(read_n(&mut r)?);
        out.v.push(read_n(&mut r)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternKind {
    ConstantSteady,
    NonconstantSteady,
    HomogeneousPeriodic,
    InhomogeneousPeriodic,
    QuasiPeriodic,
    Undecided,
}

/// Highest cosine mode inspected.
pub const MAX_MODE: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternReport {
    pub kind: PatternKind,
    /// Dominant nonzero cosine mode, or 0 for spatially constant patterns.
    pub dominant_mode: u32,
    /// Tail mean of `|c_n|` for the dominant mode.
    pub dominant_amplitude: f64,
    /// Tail mean of the signed coefficient `c_n`.
    pub dominant_coefficient: f64,
    /// Tail mean of `|c_n|` of the `u` deviation, `n = 0..=12`.
    pub mode_amplitudes: Vec<f64>,
    /// Mode whose time series was used for the temporal analysis.
    pub series_mode: u32,
    /// Peak-to-peak variation of that series over the tail.
    pub variation: f64,
    /// Base angular frequencies, original time.
    pub frequencies: Vec<f64>,
    pub periods: Vec<f64>,
    pub tail: [f64; 2],
    pub samples: usize,
    /// Tail-mean deviation of `u` from the equilibrium on the grid.
    pub profile: Vec<f64>,
    pub notes: Vec<String>,
}

/// Cosine coefficients `c_n` with `w(x) = sum c_n cos(n x / l)`, by the trapezoid rule.
pub fn cosine_modes(x: &[f64], w: &[f64], l: f64, max_mode: usize) -> Vec<f64> {
    let n = x.len();
    let len = x[n - 1] - x[0];
    let dx = len / (n - 1) as f64;
    (0..=max_mode)
        .map(|k| {
            let mut s = 0.0;
            for i in 0..n {
                let wt = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                s += wt * w[i] * (k as f64 * x[i] / l).cos();
            }
            s * dx / len * if k == 0 { 1.0 } else { 2.0 }
        })
        .collect()
}

/// Local maxima of a Hann-windowed, zero-padded periodogram, strongest first,
/// as `(angular frequency, power)`.
pub fn spectral_peaks(series: &[f64], dt: f64, rel_power: f64) -> Vec<(f64, f64)> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let size = (16 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); size];
    for (i, s) in series.iter().enumerate() {
        let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos();
        buf[i] = Complex::new((s - mean) * w, 0.0);
    }
    FftPlanner::new().plan_fft_forward(size).process(&mut buf);
    let power: Vec<f64> = buf[..size / 2].iter().map(|z| z.norm_sqr()).collect();
    let max = power.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Vec::new();
    }
    let df = 1.0 / (size as f64 * dt);
    let mut peaks: Vec<(f64, f64)> = (1..power.len() - 1)
        .filter(|&k| power[k] > power[k - 1] && power[k] >= power[k + 1] && power[k] >= rel_power * max)
        .map(|k| {
            let (a, b, c) = (power[k - 1].ln(), power[k].ln(), power[k + 1].ln());
            let denom = a - 2.0 * b + c;
            let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            (2.0 * PI * (k as f64 + shift.clamp(-0.5, 0.5)) * df, power[k])
        })
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    peaks
}

fn commensurate(f1: f64, f2: f64, tol: f64) -> bool {
    (1..=8).any(|p| (1..=8).any(|q| (p as f64 * f1 - q as f64 * f2).abs() <= tol * f1.max(f2)))
}

/// Classifies the last `fraction` of a trajectory.
pub fn analyze_pattern(tr: &Trajectory, fraction: f64) -> Result<PatternReport, SimError> {
    let count = tr.times.len();
    let start = ((1.0 - fraction.clamp(0.0, 1.0)) * count as f64).floor() as usize;
    let samples = count - start.min(count);
    if samples < 20 {
        return Err(SimError::TooFewSamples(samples));
    }
    let n = tr.x.len();
    let dev = |k: usize| -> Vec<f64> { tr.u[k].iter().map(|w| w - tr.equilibrium[0]).collect() };
    let series: Vec<Vec<f64>> = (start..count).map(|k| cosine_modes(&tr.x, &dev(k), tr.l, MAX_MODE)).collect();
    let mode_amplitudes: Vec<f64> =
        (0..=MAX_MODE).map(|j| series.iter().map(|c| c[j].abs()).sum::<f64>() / samples as f64).collect();
    let mut profile = vec![0.0; n];
    for k in start..count {
        for (p, w) in profile.iter_mut().zip(dev(k)) {
            *p += w / samples as f64;
        }
    }
    let mut notes = Vec::new();

    // Spatial structure.
    let (best, best_amp) = (1..=MAX_MODE)
        .map(|j| (j, mode_amplitudes[j]))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    let threshold = 1e-4f64.max(0.05 * mode_amplitudes[0]);
    let spatial_ratio = best_amp / threshold;
    let nonconstant = spatial_ratio > 1.0;
    let spatial_undecided = (0.8..=1.25).contains(&spatial_ratio);
    if spatial_undecided {
        notes.push(format!("mode {best} amplitude {best_amp:.3e} is close to the threshold {threshold:.3e}"));
    }
    let dominant_mode = if nonconstant { best } else { 0 };
    let dominant_coefficient = series.iter().map(|c| c[dominant_mode]).sum::<f64>() / samples as f64;

    // Temporal structure from the most variable mode series.
    let range = |j: usize| {
        let (lo, hi) = series.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c[j]), hi.max(c[j])));
        hi - lo
    };
    let (series_mode, variation) =
        (0..=MAX_MODE).map(|j| (j, range(j))).fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    let scale = mode_amplitudes.iter().copied().fold(1e-3, f64::max);
    let steady_tol = 1e-3 * scale;
    let temporal_ratio = variation / steady_tol;
    let steady = temporal_ratio <= 1.0;
    let temporal_undecided = (0.8..=1.25).contains(&temporal_ratio);
    if temporal_undecided {
        notes.push(format!("tail variation {variation:.3e} is close to the steady tolerance {steady_tol:.3e}"));
    }
    let sample_dt = tr.dt * tr.stride as f64;
    let mut frequencies = Vec::new();
    let mut quasi = false;
    if !steady {
        let s: Vec<f64> = series.iter().map(|c| c[series_mode]).collect();
        let peaks = spectral_peaks(&s, sample_dt, 1e-2);
        if let Some(&(f1, _)) = peaks.first() {
            frequencies.push(f1);
            let resolution = 2.0 * PI / (samples as f64 * sample_dt);
            if let Some(&(f2, _)) = peaks
                .iter()
                .skip(1)
                .find(|(f, _)| (f - f1).abs() > 2.0 * resolution && !commensurate(f1, *f, 0.02))
            {
                quasi = true;
                frequencies.push(f2);
            }
        } else {
            notes.push("no spectral peak found in a varying series".into());
        }
    }
    let periods = frequencies.iter().map(|w| 2.0 * PI / w).collect();
    let undecided = spatial_undecided || temporal_undecided || (!steady && frequencies.is_empty());
    let kind = match (undecided, steady, quasi, nonconstant) {
        (true, ..) => PatternKind::Undecided,
        (false, true, _, false) => PatternKind::ConstantSteady,
        (false, true, _, true) => PatternKind::NonconstantSteady,
        (false, false, true, _) => PatternKind::QuasiPeriodic,
        (false, false, false, false) => PatternKind::HomogeneousPeriodic,
        (false, false, false, true) => PatternKind::InhomogeneousPeriodic,
    };
    Ok(PatternReport {
        kind,
        dominant_mode: dominant_mode as u32,
        dominant_amplitude: mode_amplitudes[dominant_mode],
        dominant_coefficient,
        mode_amplitudes,
        series_mode: series_mode as u32,
        variation,
        frequencies,
        periods,
        tail: [tr.times[start], tr.times[count - 1]],
        samples,
        profile,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solve_matches_multiplication() {
        let n = 64;
        let c = 0.7;
        let sys = Implicit::new(n, c);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; n];
        for i in 0..n {
            let left = if i == 0 { 0.0 } else { x[i - 1] };
            let right = if i == n - 1 { 0.0 } else { x[i + 1] };
            b[i] = match i {
                0 => (1.0 + 2.0 * c) * x[0] - 2.0 * c * x[1],
                i if i == n - 1 => (1.0 + 2.0 * c) * x[i] - 2.0 * c * x[i - 1],
                _ => (1.0 + 2.0 * c) * x[i] - c * (left + right),
            };
        }
        sys.solve(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cosine_projection_recovers_coefficients() {
        let l = 5.0;
        let n = 256;
        let x: Vec<f64> = (0..n).map(|i| i as f64 * l * PI / (n - 1) as f64).collect();
        let w: Vec<f64> = x.iter().map(|x| 0.3 + 0.02 * (5.0 * x / l).cos() - 0.01 * (2.0 * x / l).cos()).collect();
        let c = cosine_modes(&x, &w, l, 12);
        assert!((c[0] - 0.3).abs() < 1e-12);
        assert!((c[5] - 0.02).abs() < 1e-12);
        assert!((c[2] + 0.01).abs() < 1e-12);
        assert!(c[1].abs() < 1e-12 && c[7].abs() < 1e-12);
    }

    #[test]
    fn periodogram_finds_a_pure_tone() {
        let dt = 0.1;
        let s: Vec<f64> = (0..2000).map(|i| (2.3 * i as f64 * dt).sin()).collect();
        let peaks = spectral_peaks(&s, dt, 1e-2);
        assert!((peaks[0].0 - 2.3).abs() < 1e-3, "{peaks:?}");
    }

    #[test]
    fn incommensurability_test() {
        assert!(commensurate(1.0, 2.0, 0.02));
        assert!(commensurate(1.0, 1.5, 0.02));
        assert!(!commensurate(1.0, 2.0f64.sqrt(), 0.02));
    }
}
