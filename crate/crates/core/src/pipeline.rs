//! End-to-end analysis of one model and the consolidated JSON report.

use std::io;

use num_complex::Complex64 as C;
use serde::Serialize;
use thiserror::Error;

use crate::amplitude::{
    classify_unfolding, predict_attractor, region_map, to_amplitude, AmplitudeError, AmplitudeSystem,
    AttractorPrediction, Ray, RegionMap, Signature,
};
use crate::eigenbasis::{compute_basis, BasisResiduals, EigenBasis, EigenError};
use crate::model::{DerivativeBundle, ModelError, ModelSpec};
use crate::normalform::{normal_form, NormalForm, NormalFormError, Validation};
use crate::simulate::SimError;
use crate::spectrum::{locate_turing_hopf, SearchConfig, SpectrumError, TuringHopfPoint};

/// Version tag of the JSON documents written by [`to_json`].
pub const SCHEMA: &str = "thk-report/1";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error(transparent)]
    NormalForm(#[from] NormalFormError),
    #[error(transparent)]
    Amplitude(#[from] AmplitudeError),
    #[error(transparent)]
    Simulate(#[from] SimError),
}

impl PipelineError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::Model(_) => "model",
            PipelineError::Spectrum(SpectrumError::NoBifurcationFound) => "no-bifurcation",
            PipelineError::Spectrum(SpectrumError::CertificationFailed { .. }) => "certification-failed",
            PipelineError::Spectrum(SpectrumError::TransversalityFailed { .. }) => "transversality-failed",
            PipelineError::Spectrum(SpectrumError::Model(_)) => "model",
            PipelineError::Spectrum(_) => "spectrum",
            PipelineError::Eigen(_) => "eigenbasis",
            PipelineError::NormalForm(NormalFormError::Resonance { .. }) => "resonance",
            PipelineError::NormalForm(NormalFormError::ValidationFailed { .. }) => "validation-failed",
            PipelineError::NormalForm(_) => "normalform",
            PipelineError::Amplitude(AmplitudeError::OutsideCatalog(_)) => "outside-catalog",
            PipelineError::Amplitude(_) => "amplitude",
            PipelineError::Simulate(SimError::BlowUp { .. }) => "blow-up",
            PipelineError::Simulate(SimError::Config(_)) => "sim-config",
            PipelineError::Simulate(_) => "simulate",
        }
    }
}

/// All stages from the located point to the amplitude system.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub model: ModelSpec,
    pub point: TuringHopfPoint,
    /// Derivatives of the unit-delay model at the point.
    pub bundle: DerivativeBundle,
    pub basis: EigenBasis,
    pub normal_form: NormalForm,
    pub amplitude: AmplitudeSystem,
    pub case: &'static str,
}

impl Analysis {
    pub fn run(model: &ModelSpec) -> Result<Analysis, PipelineError> {
        Analysis::run_with(model, &model.search)
    }

    pub fn run_with(model: &ModelSpec, search: &SearchConfig) -> Result<Analysis, PipelineError> {
        let point = locate_turing_hopf(model, search)?;
        let bundle = model.unit_delay().derivative_bundle(point.mu)?;
        let basis = compute_basis(&bundle.linear, &point)?;
        let nf = normal_form(&bundle, &basis)?;
        let amplitude = to_amplitude(&nf.coeffs)?;
        let case = classify_unfolding(&amplitude)?;
        Ok(Analysis { model: model.clone(), point, bundle, basis, normal_form: nf, amplitude, case })
    }

    /// Parameter values `mu0 + alpha` in the model's own parameters.
    pub fn mu_at(&self, alpha: [f64; 2]) -> [f64; 2] {
        [self.point.mu[0] + alpha[0], self.point.mu[1] + alpha[1]]
    }

    pub fn predict(&self, alpha: [f64; 2], rho: f64) -> Result<AttractorPrediction, AmplitudeError> {
        predict_attractor(&self.amplitude, &self.basis, &self.point, alpha, rho)
    }

    pub fn regions(&self, half_width: f64, resolution: usize) -> RegionMap {
        region_map(&self.amplitude, [[-half_width, half_width], [-half_width, half_width]], resolution)
    }

    pub fn point_summary(&self) -> PointSummary {
        PointSummary { omega_original: self.point.omega_original(), point: self.point.clone() }
    }

    pub fn basis_summary(&self) -> BasisSummary {
        let b = &self.basis;
        BasisSummary {
            k1: b.k1,
            k2: b.k2,
            k3: b.k3,
            k4: b.k4,
            t1: b.t1,
            t2: b.t2,
            residuals: b.residuals(&self.bundle.linear),
        }
    }

    pub fn coefficient_summary(&self) -> CoefficientSummary {
        let c = &self.normal_form.coeffs;
        let h = &self.normal_form.h;
        CoefficientSummary {
            f11_alpha: c.f11_alpha,
            f13_alpha: c.f13_alpha,
            g210: c.g210,
            g102: c.g102,
            g111: c.g111,
            g003: c.g003,
            scale: c.scale,
            validation: h.validation.clone(),
            resolvents: h
                .components
                .iter()
                .map(|comp| ResolventSummary {
                    monomial: comp.monomial.label(),
                    mode: comp.target.mode(self.basis.n2),
                    condition: comp.condition,
                })
                .collect(),
        }
    }

    pub fn amplitude_summary(&self) -> AmplitudeSummary {
        AmplitudeSummary { system: self.amplitude.clone(), case: self.case }
    }

    pub fn region_summary(map: &RegionMap) -> RegionSummary {
        RegionSummary {
            rect: map.rect,
            resolution: map.resolution,
            regions: map
                .regions
                .iter()
                .enumerate()
                .map(|(idx, r)| RegionEntry {
                    sample: representative(map, idx),
                    label: r.label.clone(),
                    signature: r.signature.clone(),
                    description: r.description.clone(),
                    cells: r.cells,
                })
                .collect(),
            rays: map.rays.clone(),
        }
    }

    /// Consolidated report with a prediction at a representative point of each region.
    pub fn report(&self, half_width: f64, resolution: usize, rho: f64) -> Report {
        let map = self.regions(half_width, resolution);
        let regions = Analysis::region_summary(&map);
        let predictions = regions
            .regions
            .iter()
            .filter_map(|r| r.sample)
            .map(|a| self.predict(a, rho).map_err(|e| e.to_string()))
            .collect();
        Report {
            schema: SCHEMA,
            tool: ToolInfo { name: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION") },
            model: ModelEcho::new(&self.model),
            point: self.point_summary(),
            eigenbasis: self.basis_summary(),
            normal_form: self.coefficient_summary(),
            amplitude: self.amplitude_summary(),
            regions,
            predictions,
        }
    }
}

/// Region cell closest to the centroid of that region's cells.
fn representative(map: &RegionMap, region: usize) -> Option<[f64; 2]> {
    let n = map.resolution;
    let cells: Vec<[f64; 2]> = (0..n)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .filter(|&(i, j)| map.cells[j * n + i] == region)
        .map(|(i, j)| map.cell_center(i, j))
        .collect();
    if cells.is_empty() {
        return None;
    }
    let k = cells.len() as f64;
    let c = cells.iter().fold([0.0, 0.0], |a, p| [a[0] + p[0] / k, a[1] + p[1] / k]);
    cells.into_iter().min_by(|a, b| {
        let da = (a[0] - c[0]).powi(2) + (a[1] - c[1]).powi(2);
        let db = (b[0] - c[0]).powi(2) + (b[1] - c[1]).powi(2);
        da.total_cmp(&db)
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PointSummary {
    #[serde(flatten)]
    pub point: TuringHopfPoint,
    pub omega_original: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BasisSummary {
    #[serde(serialize_with = "crate::cser::one")]
    pub k1: C,
    #[serde(serialize_with = "crate::cser::one")]
    pub k2: C,
    #[serde(serialize_with = "crate::cser::one")]
    pub k3: C,
    #[serde(serialize_with = "crate::cser::one")]
    pub k4: C,
    #[serde(serialize_with = "crate::cser::one")]
    pub t1: C,
    #[serde(serialize_with = "crate::cser::one")]
    pub t2: C,
    pub residuals: BasisResiduals,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventSummary {
    pub monomial: &'static str,
    pub mode: u32,
    pub condition: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientSummary {
    #[serde(serialize_with = "crate::cser::many")]
    pub f11_alpha: [C; 2],
    #[serde(serialize_with = "crate::cser::many")]
    pub f13_alpha: [C; 2],
    #[serde(serialize_with = "crate::cser::one")]
    pub g210: C,
    #[serde(serialize_with = "crate::cser::one")]
    pub g102: C,
    #[serde(serialize_with = "crate::cser::one")]
    pub g111: C,
    #[serde(serialize_with = "crate::cser::one")]
    pub g003: C,
    pub scale: f64,
    pub validation: Validation,
    pub resolvents: Vec<ResolventSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AmplitudeSummary {
    #[serde(flatten)]
    pub system: AmplitudeSystem,
    pub case: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionEntry {
    pub label: String,
    pub signature: Signature,
    pub description: String,
    pub cells: usize,
    pub sample: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionSummary {
    pub rect: [[f64; 2]; 2],
    pub resolution: usize,
    pub regions: Vec<RegionEntry>,
    pub rays: Vec<Ray>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelEcho {
    pub name: String,
    pub params: [String; 2],
    pub base: [f64; 2],
    pub l: f64,
    pub shift: [f64; 2],
    pub search: SearchConfig,
    pub source: String,
}

impl ModelEcho {
    pub fn new(m: &ModelSpec) -> ModelEcho {
        ModelEcho {
            name: m.name.clone(),
            params: m.params.clone(),
            base: m.base,
            l: m.l,
            shift: m.shift,
            search: m.search.clone(),
            source: m.to_toml(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub tool: ToolInfo,
    pub model: ModelEcho,
    pub point: PointSummary,
    pub eigenbasis: BasisSummary,
    pub normal_form: CoefficientSummary,
    pub amplitude: AmplitudeSummary,
    pub regions: RegionSummary,
    pub predictions: Vec<Result<AttractorPrediction, String>>,
}

/// Writes floats with 17 significant digits.
struct Fixed;

impl serde_json::ser::Formatter for Fixed {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value == 0.0 {
            w.write_all(b"0.0")
        } else {
            write!(w, "{value:.16e}")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

/// Deterministic JSON: object keys sorted, floats at 17 significant digits,
/// non-finite values as `null`.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let tree = serde_json::to_value(value)?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Fixed);
    tree.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn json_is_sorted_and_fixed_width() {
        let mut m = HashMap::new();
        m.insert("zeta", 1.0 / 3.0);
        m.insert("alpha", f64::NAN);
        m.insert("mid", 0.0);
        let s = to_json(&m).unwrap();
        assert_eq!(s, r#"{"alpha":null,"mid":0.0,"zeta":3.3333333333333331e-1}"#);
        let back: HashMap<String, Option<f64>> = serde_json::from_str(&s).unwrap();
        assert_eq!(back["zeta"], Some(1.0 / 3.0));
    }
}
