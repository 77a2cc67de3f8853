//! Model specification, linearization and the derivative bundle.
//!
//! A model is two reaction terms `f`, `g` in the state symbols `u`, `v` and
//! their delayed copies `u_tau`, `v_tau`, two diffusion coefficients, a domain
//! `(0, l*pi)` and two bifurcation parameters. The origin must be an
//! equilibrium for every parameter value; models with a fixed nonzero
//! equilibrium are moved there with a `[shift]` section.
//!
//! Model files are TOML:
//!
//! ```toml
//! [model]
//! f = "u*(1-u) - a*u*v/(u+b)"
//! g = "r*v*(1 - v_tau/u_tau)"
//! d1 = 0.1
//! d2 = 10
//! l = 5
//!
//! [constants]          # evaluated in order, may reference earlier ones
//! a = 1.0
//! b = 0.1
//! ue = "(-(a+b-1) + sqrt((a+b-1)^2 + 4*b))/2"
//!
//! [shift]              # u -> u + ue, u_tau -> u_tau + ue, and so on
//! u = "ue"
//! v = "ue"
//!
//! [parameters]         # exactly two, in bifurcation order
//! tau = 0.4567
//! r = 2.8646
//!
//! [delay]
//! mode = "parameter"   # or "unit"
//! parameter = "tau"
//! ```
//!
//! Optional `[search]` and `[simulate]` tables hold defaults for
//! [`SearchConfig`] and [`SimConfig`].

use nalgebra::Matrix2;
use serde::Deserialize;
use thiserror::Error;

use crate::expr::{parse_declared, Compiled, Expr, ExprError};
use crate::simulate::SimConfig;
use crate::spectrum::SearchConfig;

/// State symbols in derivative-bundle order.
pub const STATE: [&str; 4] = ["u", "v", "u_tau", "v_tau"];

/// A point in the two-dimensional parameter plane.
pub type Mu = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model file: {0}")]
    Parse(String),
    #[error("in `{field}`: {source}")]
    Expr { field: String, source: ExprError },
    #[error("origin is not an equilibrium at {mu:?}: f = {f}, g = {g}")]
    EquilibriumViolation { mu: Mu, f: f64, g: f64 },
    #[error("diffusion coefficient {which} = {value} is not positive at {mu:?}")]
    NonPositiveDiffusion { which: &'static str, value: f64, mu: Mu },
    #[error("delay rescaling does not apply: model already has unit delay")]
    NotApplicable,
    #[error("domain error evaluating `{field}` at {mu:?}")]
    Domain { field: String, mu: Mu },
}

#[derive(Debug, Clone, PartialEq)]
pub enum DelayMode {
    /// The delay is already one time unit.
    Unit,
    /// The delay equals the named bifurcation parameter.
    Parameter(String),
    /// Unit delay obtained by rescaling time with the named parameter.
    Rescaled(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub f: Expr,
    pub g: Expr,
    pub d1: Expr,
    pub d2: Expr,
    pub l: f64,
    /// Bifurcation parameter names, `[mu1, mu2]`.
    pub params: [String; 2],
    pub base: Mu,
    pub delay: DelayMode,
    /// Equilibrium of the unshifted model; the origin of `f`, `g` sits here.
    pub shift: [f64; 2],
    pub search: SearchConfig,
    pub simulate: SimConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPart {
    pub a: Matrix2<f64>,
    pub b: Matrix2<f64>,
    pub d: Matrix2<f64>,
    pub da: [Matrix2<f64>; 2],
    pub db: [Matrix2<f64>; 2],
    pub dd: [Matrix2<f64>; 2],
}

impl LinearPart {
    /// Scale used for relative tolerances at spatial mode `n`.
    pub fn scale(&self, n: u32, l: f64) -> f64 {
        let kappa = (n as f64 / l).powi(2);
        1.0 + inf_norm(&self.a) + inf_norm(&self.b) + kappa * inf_norm(&self.d)
    }

    /// Induced infinity norms of `A` and `B`.
    pub fn norms(&self) -> (f64, f64) {
        (inf_norm(&self.a), inf_norm(&self.b))
    }
}

pub(crate) fn inf_norm(m: &Matrix2<f64>) -> f64 {
    (m[(0, 0)].abs() + m[(0, 1)].abs()).max(m[(1, 0)].abs() + m[(1, 1)].abs())
}

/// All partial derivatives of `(f, g)` up to order three at the origin.
///
/// Indices run over [`STATE`]; the arrays are fully symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBundle {
    pub mu: Mu,
    pub first: [[f64; 4]; 2],
    pub second: [[[f64; 4]; 4]; 2],
    pub third: [[[[f64; 4]; 4]; 4]; 2],
    pub linear: LinearPart,
}

impl DerivativeBundle {
    /// Number of distinct values held: 2 x (4 + 10 + 20).
    pub const DISTINCT: usize = 68;
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    model: RawModel,
    parameters: toml::Table,
    #[serde(default)]
    constants: toml::Table,
    #[serde(default)]
    shift: toml::Table,
    delay: Option<RawDelay>,
    search: Option<SearchConfig>,
    simulate: Option<SimConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(default)]
    name: Option<String>,
    f: toml::Value,
    g: toml::Value,
    d1: toml::Value,
    d2: toml::Value,
    l: toml::Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDelay {
    mode: String,
    parameter: Option<String>,
}

fn value_text(field: &str, v: &toml::Value) -> Result<String, ModelError> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Float(x) => Ok(format!("{x:?}")),
        toml::Value::Integer(i) => Ok(i.to_string()),
        _ => Err(ModelError::Parse(format!("`{field}` must be a number or an expression string"))),
    }
}

fn parse_field(field: &str, v: &toml::Value, declared: &[String]) -> Result<Expr, ModelError> {
    let text = value_text(field, v)?;
    parse_declared(&text, declared)
        .map_err(|source| ModelError::Expr { field: field.to_string(), source })
}

fn constant_value(
    field: &str,
    v: &toml::Value,
    known: &[(String, f64)],
) -> Result<f64, ModelError> {
    let names: Vec<String> = known.iter().map(|(k, _)| k.clone()).collect();
    let e = parse_field(field, v, &names)?;
    e.eval_with(&|s| known.iter().find(|(k, _)| k == s).map(|(_, x)| *x))
        .map_err(|source| ModelError::Expr { field: field.to_string(), source })
}

/// Parses and validates a model file.
pub fn load_model(text: &str) -> Result<ModelSpec, ModelError> {
    let raw: RawFile = toml::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;

    let mut constants: Vec<(String, f64)> = Vec::new();
    for (name, v) in &raw.constants {
        let x = constant_value(&format!("constants.{name}"), v, &constants)?;
        constants.push((name.clone(), x));
    }

    if raw.parameters.len() != 2 {
        return Err(ModelError::Parse(format!(
            "[parameters] must hold exactly two entries, found {}",
            raw.parameters.len()
        )));
    }
    let mut params: Vec<String> = Vec::new();
    let mut base = [0.0; 2];
    for (i, (name, v)) in raw.parameters.iter().enumerate() {
        if STATE.contains(&name.as_str()) || constants.iter().any(|(k, _)| k == name) {
            return Err(ModelError::Parse(format!("parameter `{name}` shadows another symbol")));
        }
        base[i] = v
            .as_float()
            .or_else(|| v.as_integer().map(|i| i as f64))
            .ok_or_else(|| ModelError::Parse(format!("parameter `{name}` needs a numeric value")))?;
        params.push(name.clone());
    }
    let params: [String; 2] = [params[0].clone(), params[1].clone()];

    let mut shift = [0.0; 2];
    for (name, v) in &raw.shift {
        let slot = match name.as_str() {
            "u" => 0,
            "v" => 1,
            _ => return Err(ModelError::Parse(format!("[shift] accepts only `u` and `v`, found `{name}`"))),
        };
        shift[slot] = constant_value(&format!("shift.{name}"), v, &constants)?;
    }

    let mut reaction_syms: Vec<String> = STATE.iter().map(|s| s.to_string()).collect();
    reaction_syms.extend(params.iter().cloned());
    reaction_syms.extend(constants.iter().map(|(k, _)| k.clone()));
    let mut diffusion_syms: Vec<String> = params.to_vec();
    diffusion_syms.extend(constants.iter().map(|(k, _)| k.clone()));

    let bind_constants = |e: Expr| {
        e.map_symbols(&|s| {
            if let Some(i) = ["u", "v", "u_tau", "v_tau"].iter().position(|n| *n == s) {
                let offset = shift[i % 2];
                return (offset != 0.0).then(|| Expr::add(Expr::sym(s), Expr::num(offset)));
            }
            constants.iter().find(|(k, _)| k == s).map(|(_, x)| Expr::num(*x))
        })
    };
    let f = bind_constants(parse_field("model.f", &raw.model.f, &reaction_syms)?);
    let g = bind_constants(parse_field("model.g", &raw.model.g, &reaction_syms)?);
    let d1 = bind_constants(parse_field("model.d1", &raw.model.d1, &diffusion_syms)?);
    let d2 = bind_constants(parse_field("model.d2", &raw.model.d2, &diffusion_syms)?);
    let l = constant_value("model.l", &raw.model.l, &constants)?;
    if !(l > 0.0) {
        return Err(ModelError::Parse(format!("domain factor l = {l} must be positive")));
    }

    let delay = match raw.delay {
        None => DelayMode::Unit,
        Some(RawDelay { mode, parameter }) => match (mode.as_str(), parameter) {
            ("unit", None) => DelayMode::Unit,
            ("parameter", Some(p)) if params.contains(&p) => DelayMode::Parameter(p),
            ("parameter", Some(p)) => {
                return Err(ModelError::Parse(format!("delay parameter `{p}` is not a bifurcation parameter")))
            }
            _ => return Err(ModelError::Parse("[delay] needs mode = \"unit\" or mode = \"parameter\" with a parameter name".into())),
        },
    };

    let spec = ModelSpec {
        name: raw.model.name.unwrap_or_else(|| "model".into()),
        f,
        g,
        d1,
        d2,
        l,
        params,
        base,
        delay,
        shift,
        search: raw.search.unwrap_or_default(),
        simulate: raw.simulate.unwrap_or_default(),
    };
    spec.validate()?;
    Ok(spec)
}

impl ModelSpec {
    /// Builds a unit-delay model directly from expressions; runs the same checks as [`load_model`].
    pub fn from_parts(
        f: Expr,
        g: Expr,
        d: [Expr; 2],
        l: f64,
        params: [&str; 2],
        base: Mu,
    ) -> Result<ModelSpec, ModelError> {
        let [d1, d2] = d;
        let spec = ModelSpec {
            name: "model".into(),
            f,
            g,
            d1,
            d2,
            l,
            params: [params[0].to_string(), params[1].to_string()],
            base,
            delay: DelayMode::Unit,
            shift: [0.0; 2],
            search: SearchConfig::default(),
            simulate: SimConfig::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let [[lo1, hi1], [lo2, hi2]] = self.search.bounds_around(self.base);
        for i in 0..3 {
            for j in 0..3 {
                let mu = [
                    lo1 + (hi1 - lo1) * i as f64 / 2.0,
                    lo2 + (hi2 - lo2) * j as f64 / 2.0,
                ];
                let at_origin = |e: &Expr| self.eval_at(e, &[0.0; 4], mu);
                let (fv, gv) = match (at_origin(&self.f), at_origin(&self.g)) {
                    (Ok(fv), Ok(gv)) => (fv, gv),
                    (fv, gv) => (fv.unwrap_or(f64::NAN), gv.unwrap_or(f64::NAN)),
                };
                if !(fv.abs() <= 1e-10 && gv.abs() <= 1e-10) {
                    return Err(ModelError::EquilibriumViolation { mu, f: fv, g: gv });
                }
                for (which, e) in [("d1", &self.d1), ("d2", &self.d2)] {
                    let value = at_origin(e).map_err(|_| ModelError::Domain { field: which.into(), mu })?;
                    if !(value > 0.0) {
                        return Err(ModelError::NonPositiveDiffusion { which, value, mu });
                    }
                }
            }
        }
        Ok(())
    }

    fn eval_at(&self, e: &Expr, state: &[f64; 4], mu: Mu) -> Result<f64, ExprError> {
        e.eval_with(&|s| match STATE.iter().position(|n| *n == s) {
            Some(i) => Some(state[i]),
            None => self.params.iter().position(|p| p == s).map(|i| mu[i]),
        })
    }

    /// Evaluates `(f, g)` at a state `(u, v, u_tau, v_tau)` relative to the equilibrium.
    pub fn reaction(&self, state: &[f64; 4], mu: Mu) -> Result<[f64; 2], ExprError> {
        Ok([self.eval_at(&self.f, state, mu)?, self.eval_at(&self.g, state, mu)?])
    }

    pub fn diffusion(&self, mu: Mu) -> Result<[f64; 2], ExprError> {
        Ok([self.eval_at(&self.d1, &[0.0; 4], mu)?, self.eval_at(&self.d2, &[0.0; 4], mu)?])
    }

    /// Slot order used by [`ModelSpec::compiled`]: the state symbols, then the parameters.
    pub fn slots(&self) -> [&str; 6] {
        [STATE[0], STATE[1], STATE[2], STATE[3], &self.params[0], &self.params[1]]
    }

    /// Compiled `[f, g, d1, d2]` over [`ModelSpec::slots`].
    pub fn compiled(&self) -> Result<[Compiled; 4], ExprError> {
        let slots = self.slots();
        Ok([
            self.f.compile(&slots)?,
            self.g.compile(&slots)?,
            self.d1.compile(&slots)?,
            self.d2.compile(&slots)?,
        ])
    }

    /// True when frequencies must be divided by the delay parameter to get original time.
    pub fn time_scale_param(&self) -> Option<usize> {
        match &self.delay {
            DelayMode::Rescaled(p) => self.params.iter().position(|q| q == p),
            _ => None,
        }
    }

    /// The delay in the model's own time unit at `mu`.
    pub fn delay_at(&self, mu: Mu) -> f64 {
        match &self.delay {
            DelayMode::Parameter(p) => mu[self.params.iter().position(|q| q == p).unwrap_or(0)],
            DelayMode::Unit | DelayMode::Rescaled(_) => 1.0,
        }
    }

    /// Normalizes the delay to one by the time change `t -> t/tau`.
    pub fn rescale_delay(&self) -> Result<ModelSpec, ModelError> {
        let DelayMode::Parameter(p) = &self.delay else {
            return Err(ModelError::NotApplicable);
        };
        let scale = |e: &Expr| Expr::mul(Expr::sym(p), e.clone());
        Ok(ModelSpec {
            f: scale(&self.f),
            g: scale(&self.g),
            d1: scale(&self.d1),
            d2: scale(&self.d2),
            delay: DelayMode::Rescaled(p.clone()),
            ..self.clone()
        })
    }

    /// The unit-delay form used by the analysis: rescaled if needed, unchanged otherwise.
    pub fn unit_delay(&self) -> ModelSpec {
        self.rescale_delay().unwrap_or_else(|_| self.clone())
    }

    pub fn linearizer(&self) -> Result<Linearizer, ModelError> {
        Linearizer::new(self)
    }

    pub fn linear_part(&self, mu: Mu) -> Result<LinearPart, ModelError> {
        self.linearizer()?.at(mu)
    }

    pub fn derivative_bundle(&self, mu: Mu) -> Result<DerivativeBundle, ModelError> {
        let linear = self.linear_part(mu)?;
        let mut first = [[0.0; 4]; 2];
        let mut second = [[[0.0; 4]; 4]; 2];
        let mut third = [[[[0.0; 4]; 4]; 4]; 2];
        let origin = [0.0; 4];
        for (h, (name, e)) in [("f", &self.f), ("g", &self.g)].into_iter().enumerate() {
            let eval = |d: &Expr| {
                self.eval_at(d, &origin, mu).map_err(|_| ModelError::Domain { field: name.into(), mu })
            };
            for i in 0..4 {
                let di = e.differentiate(STATE[i]);
                first[h][i] = eval(&di)?;
                for j in i..4 {
                    let dij = di.differentiate(STATE[j]);
                    let x = eval(&dij)?;
                    second[h][i][j] = x;
                    second[h][j][i] = x;
                    for k in j..4 {
                        let x = eval(&dij.differentiate(STATE[k]))?;
                        for [p, q, r] in permutations(i, j, k) {
                            third[h][p][q][r] = x;
                        }
                    }
                }
            }
        }
        Ok(DerivativeBundle { mu, first, second, third, linear })
    }

    /// Serializes the resolved model back to the file format.
    pub fn to_toml(&self) -> String {
        let quote = |e: &Expr| toml::Value::String(e.to_string()).to_string();
        let mut out = format!(
            "[model]\nname = {}\nf = {}\ng = {}\nd1 = {}\nd2 = {}\nl = {:?}\n\n[parameters]\n{} = {:?}\n{} = {:?}\n",
            toml::Value::String(self.name.clone()),
            quote(&self.f),
            quote(&self.g),
            quote(&self.d1),
            quote(&self.d2),
            self.l,
            self.params[0],
            self.base[0],
            self.params[1],
            self.base[1],
        );
        if let DelayMode::Parameter(p) = &self.delay {
            out.push_str(&format!("\n[delay]\nmode = \"parameter\"\nparameter = \"{p}\"\n"));
        }
        out
    }
}

fn permutations(i: usize, j: usize, k: usize) -> [[usize; 3]; 6] {
    [[i, j, k], [i, k, j], [j, i, k], [j, k, i], [k, i, j], [k, j, i]]
}

/// Precompiled first derivatives for fast repeated linearization.
#[derive(Debug, Clone)]
pub struct Linearizer {
    /// `[h][x]`: d(f|g)/dx for x over STATE.
    jac: Vec<Compiled>,
    /// `[p][h][x]`: d2(f|g)/dmu_p dx.
    djac: Vec<Compiled>,
    diff: Vec<Compiled>,
    ddiff: Vec<Compiled>,
}

impl Linearizer {
    fn new(m: &ModelSpec) -> Result<Linearizer, ModelError> {
        let slots = m.slots();
        let compile = |field: &str, e: Expr| {
            e.compile(&slots).map_err(|source| ModelError::Expr { field: field.into(), source })
        };
        let mut jac = Vec::new();
        let mut djac = Vec::new();
        for p in &m.params {
            for (name, e) in [("f", &m.f), ("g", &m.g)] {
                for x in STATE {
                    djac.push(compile(name, e.differentiate(p).differentiate(x))?);
                }
            }
        }
        for (name, e) in [("f", &m.f), ("g", &m.g)] {
            for x in STATE {
                jac.push(compile(name, e.differentiate(x))?);
            }
        }
        let diff = vec![compile("d1", m.d1.clone())?, compile("d2", m.d2.clone())?];
        let mut ddiff = Vec::new();
        for p in &m.params {
            ddiff.push(compile("d1", m.d1.differentiate(p))?);
            ddiff.push(compile("d2", m.d2.differentiate(p))?);
        }
        Ok(Linearizer { jac, djac, diff, ddiff })
    }

    pub fn at(&self, mu: Mu) -> Result<LinearPart, ModelError> {
        let slots = [0.0, 0.0, 0.0, 0.0, mu[0], mu[1]];
        let ev = |c: &Compiled, field: &str| {
            let x = c.eval(&slots);
            if x.is_finite() {
                Ok(x)
            } else {
                Err(ModelError::Domain { field: field.into(), mu })
            }
        };
        let split = |cs: &[Compiled]| -> Result<(Matrix2<f64>, Matrix2<f64>), ModelError> {
            let mut a = Matrix2::zeros();
            let mut b = Matrix2::zeros();
            for h in 0..2 {
                for x in 0..2 {
                    a[(h, x)] = ev(&cs[4 * h + x], "reaction")?;
                    b[(h, x)] = ev(&cs[4 * h + x + 2], "reaction")?;
                }
            }
            Ok((a, b))
        };
        let (a, b) = split(&self.jac)?;
        let (da0, db0) = split(&self.djac[0..8])?;
        let (da1, db1) = split(&self.djac[8..16])?;
        let d = Matrix2::new(ev(&self.diff[0], "d1")?, 0.0, 0.0, ev(&self.diff[1], "d2")?);
        let dd = |p: usize| -> Result<Matrix2<f64>, ModelError> {
            Ok(Matrix2::new(ev(&self.ddiff[2 * p], "d1")?, 0.0, 0.0, ev(&self.ddiff[2 * p + 1], "d2")?))
        };
        Ok(LinearPart { a, b, d, da: [da0, da1], db: [db0, db1], dd: [dd(0)?, dd(1)?] })
    }
}
