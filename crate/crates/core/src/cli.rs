//! The `thk` command-line front end.
//!
//! Results go to stdout as deterministic JSON. Failures are reported on stderr
//! as one JSON line `{"code", "error", "exit"}`; the exit status is 1 for
//! usage and input errors and 2 when an analysis or validation step fails.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::model::{load_model, ModelSpec};
use crate::pipeline::{to_json, Analysis, PipelineError, SCHEMA};
use crate::simulate::{analyze_pattern, run_from, PatternReport, SimConfig};
use crate::HOLLING_TANNER;

/// Name accepted in place of a model path for the bundled Holling-Tanner model.
pub const BUILTIN: &str = "builtin:holling-tanner";

#[derive(Debug, Parser)]
#[command(name = "thk", version, about = "Turing-Hopf analysis of delayed reaction-diffusion models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Locate and certify the Turing-Hopf point.
    Analyze(Common),
    /// Normal-form coefficients at the located point.
    Normalform(Common),
    /// Amplitude-system constants and unfolding case.
    Amplitude(Common),
    /// Region map of the parameter neighbourhood with critical rays and a gnuplot script.
    Regions {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
        /// Directory for regions.csv, rays.csv and regions.gp.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Integrate the PDE at mu0 + alpha and classify the pattern.
    Simulate(SimulateArgs),
    /// Consolidated report of every stage.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
        /// Amplitude of the planar cycle used for quasi-periodic predictions.
        #[arg(long, default_value_t = 0.01)]
        rho: f64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in golden checks on the bundled model.
    Selftest {
        /// Skip the two long simulations.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Model TOML file, or `builtin:holling-tanner`.
    model: String,
    /// Root-counting margin: roots with Re >= -delta are counted.
    #[arg(long)]
    delta: Option<f64>,
    /// Largest Turing mode searched.
    #[arg(long)]
    n_max: Option<u32>,
    /// Largest mode certified.
    #[arg(long)]
    cert_n_max: Option<u32>,
    /// Scaled residual required of the located point.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct Grid {
    /// Half-width of the square alpha box.
    #[arg(long = "box", default_value_t = 0.2)]
    half_width: f64,
    /// Cells per axis.
    #[arg(long, default_value_t = 200)]
    resolution: usize,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Parameter offset from the located point.
    #[arg(long, num_args = 2, allow_negative_numbers = true, value_names = ["A1", "A2"], required = true)]
    alpha: Vec<f64>,
    /// Simulation settings as TOML, overriding the model's [simulate] table.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    steps_per_delay: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    /// Negate every perturbation amplitude.
    #[arg(long)]
    negate: bool,
    /// Initial deviations as CSV rows `x,u,v` (header allowed), replacing the perturbation.
    #[arg(long)]
    initial: Option<PathBuf>,
    /// Fraction of the horizon analysed.
    #[arg(long, default_value_t = 0.25)]
    tail: f64,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    binary: Option<PathBuf>,
}

/// Failure with an exit status and a machine-readable code.
#[derive(Debug)]
struct Failure {
    exit: i32,
    code: &'static str,
    error: anyhow::Error,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Failure {
        let exit = if matches!(e, PipelineError::Model(_)) { 1 } else { 2 };
        Failure { exit, code: e.code(), error: e.into() }
    }
}

fn usage(e: anyhow::Error) -> Failure {
    Failure { exit: 1, code: "usage", error: e }
}

fn io_failure(e: anyhow::Error) -> Failure {
    Failure { exit: 1, code: "io", error: e }
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    code: &'a str,
    error: String,
    exit: i32,
}

/// Parses `args` (including the program name), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let exit = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return exit;
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(cli.command, &mut stdout) {
        Ok(code) => code,
        Err(f) => {
            let line = ErrorLine { code: f.code, error: format!("{:#}", f.error), exit: f.exit };
            eprintln!("{}", serde_json::to_string(&line).unwrap_or_default());
            f.exit
        }
    }
}

fn load(common: &Common) -> Result<ModelSpec, Failure> {
    let text = if common.model == BUILTIN {
        HOLLING_TANNER.to_string()
    } else {
        fs::read_to_string(&common.model).with_context(|| format!("reading {}", common.model)).map_err(usage)?
    };
    let mut m = load_model(&text).map_err(PipelineError::from)?;
    if let Some(d) = common.delta {
        m.search.delta = d;
    }
    if let Some(n) = common.n_max {
        m.search.n_max = n;
    }
    if let Some(n) = common.cert_n_max {
        m.search.cert_n_max = Some(n);
    }
    if let Some(t) = common.tol {
        m.search.tol = t;
    }
    Ok(m)
}

fn emit<T: Serialize>(out: &mut impl Write, value: &T) -> Result<(), Failure> {
    let s = to_json(value).map_err(|e| io_failure(e.into()))?;
    writeln!(out, "{s}").map_err(|e| io_failure(e.into()))
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'static str,
    model: &'a str,
    #[serde(flatten)]
    body: T,
}

fn envelope<'a, T: Serialize>(m: &'a ModelSpec, body: T) -> Envelope<'a, T> {
    Envelope { schema: SCHEMA, model: &m.name, body }
}

fn execute(cmd: Command, out: &mut impl Write) -> Result<i32, Failure> {
    match cmd {
        Command::Analyze(common) => {
            let m = load(&common)?;
            let a = Analysis::run(&m)?;
            emit(out, &envelope(&m, a.point_summary()))?;
        }
        Command::Normalform(common) => {
            let m = load(&common)?;
            let a = Analysis::run(&m)?;
            emit(out, &envelope(&m, a.coefficient_summary()))?;
        }
        Command::Amplitude(common) => {
            let m = load(&common)?;
            let a = Analysis::run(&m)?;
            emit(out, &envelope(&m, a.amplitude_summary()))?;
        }
        Command::Regions { common, grid, out: dir } => {
            let m = load(&common)?;
            let a = Analysis::run(&m)?;
            let map = a.regions(grid.half_width, grid.resolution);
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display())).map_err(io_failure)?;
            let write = |name: &str, body: String| -> Result<(), Failure> {
                let p = dir.join(name);
                fs::write(&p, body).with_context(|| format!("writing {}", p.display())).map_err(io_failure)
            };
            write("regions.csv", map.to_csv())?;
            write("rays.csv", map.rays_csv())?;
            write("regions.gp", map.plot_script("regions.csv", "rays.csv"))?;
            emit(out, &envelope(&m, Analysis::region_summary(&map)))?;
        }
        Command::Simulate(args) => simulate(args, out)?,
        Command::Report { common, grid, rho, out: path } => {
            let m = load(&common)?;
            let a = Analysis::run(&m)?;
            let report = a.report(grid.half_width, grid.resolution, rho);
            match path {
                Some(p) => {
                    let s = to_json(&report).map_err(|e| io_failure(e.into()))?;
                    fs::write(&p, s + "\n").with_context(|| format!("writing {}", p.display())).map_err(io_failure)?;
                }
                None => emit(out, &report)?,
            }
        }
        Command::Selftest { quick } => {
            let results = selftest(!quick);
            let mut failed = 0;
            for r in &results {
                writeln!(out, "{} {}: {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail)
                    .map_err(|e| io_failure(e.into()))?;
                failed += usize::from(!r.pass);
            }
            return Ok(if failed == 0 { 0 } else { 2 });
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct SimulationOutput<'a> {
    alpha: [f64; 2],
    mu: [f64; 2],
    delay: f64,
    dt: f64,
    steps_per_delay: usize,
    stride: usize,
    config: &'a SimConfig,
    pattern: PatternReport,
}

fn read_initial(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let (mut u, mut v) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(anyhow!("line {}: expected x,u,v", i + 1));
        }
        match (cols[1].parse::<f64>(), cols[2].parse::<f64>()) {
            (Ok(a), Ok(b)) => {
                u.push(a);
                v.push(b);
            }
            _ if i == 0 => continue,
            _ => return Err(anyhow!("line {}: not numeric", i + 1)),
        }
    }
    Ok((u, v))
}

fn simulate(args: SimulateArgs, out: &mut impl Write) -> Result<(), Failure> {
    let m = load(&args.common)?;
    let a = Analysis::run(&m)?;
    let mut cfg = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).map_err(usage)?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display())).map_err(usage)?
        }
        None => m.simulate.clone(),
    };
    if let Some(n) = args.points {
        cfg.points = n;
    }
    if let Some(t) = args.horizon {
        cfg.horizon = t;
    }
    if args.steps_per_delay.is_some() {
        cfg.steps_per_delay = args.steps_per_delay;
    }
    if args.stride.is_some() {
        cfg.stride = args.stride;
    }
    if args.negate {
        cfg = cfg.negated();
    }
    let initial = args.initial.as_deref().map(read_initial).transpose().map_err(usage)?;
    let alpha = [args.alpha[0], args.alpha[1]];
    let mu = a.mu_at(alpha);
    let tr = run_from(&m, mu, &cfg, initial.as_ref().map(|(u, v)| (u.as_slice(), v.as_slice())))
        .map_err(PipelineError::from)?;
    if let Some(p) = &args.csv {
        let f = fs::File::create(p).with_context(|| format!("creating {}", p.display())).map_err(io_failure)?;
        tr.write_csv(BufWriter::new(f)).map_err(|e| io_failure(e.into()))?;
    }
    if let Some(p) = &args.binary {
        let f = fs::File::create(p).with_context(|| format!("creating {}", p.display())).map_err(io_failure)?;
        tr.write_binary(BufWriter::new(f)).map_err(|e| io_failure(e.into()))?;
    }
    let pattern = analyze_pattern(&tr, args.tail).map_err(PipelineError::from)?;
    let body = SimulationOutput {
        alpha,
        mu,
        delay: tr.delay,
        dt: tr.dt,
        steps_per_delay: tr.steps_per_delay,
        stride: tr.stride,
        config: &cfg,
        pattern,
    };
    emit(out, &envelope(&m, body))
}

/// Outcome of one self-test check.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check { name: name.to_string(), pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Golden checks against the bundled Holling-Tanner model.
pub fn selftest(with_simulation: bool) -> Vec<Check> {
    let mut out = Vec::new();
    let m = match load_model(HOLLING_TANNER) {
        Ok(m) => m,
        Err(e) => return vec![check("model", false, e.to_string())],
    };
    out.push(check(
        "equilibrium",
        (m.shift[0] - 0.270).abs() <= 5e-4 && (m.shift[1] - 0.270).abs() <= 5e-4,
        format!("({:.6}, {:.6})", m.shift[0], m.shift[1]),
    ));
    let a = match Analysis::run(&m) {
        Ok(a) => a,
        Err(e) => {
            out.push(check("analysis", false, e.to_string()));
            return out;
        }
    };
    let p = &a.point;
    out.push(check(
        "point",
        (p.mu[0] - 0.4567).abs() <= 1e-3
            && (p.mu[1] - 2.8646).abs() <= 1e-3
            && (p.omega_original() - 2.8899).abs() <= 1e-3
            && p.n2 == 5,
        format!("mu = ({:.6}, {:.6}), omega = {:.6}, n2 = {}", p.mu[0], p.mu[1], p.omega_original(), p.n2),
    ));
    let c = &a.normal_form.coeffs;
    let expected = [
        (c.f11_alpha[0].re, 3.5526),
        (c.f11_alpha[0].im, 2.0355),
        (c.f11_alpha[1].re, 0.4523),
        (c.f11_alpha[1].im, 0.4291),
        (c.f13_alpha[1].re, -0.0433),
        (c.g210.re, -25.8208),
        (c.g210.im, -41.9428),
        (c.g102.re, -0.8398),
        (c.g102.im, 0.1637),
        (c.g111.re, -0.2315),
        (c.g003.re, -0.6018),
    ];
    let worst = expected.iter().map(|&(x, e)| rel(x, e)).fold(0.0, f64::max);
    out.push(check(
        "normal form",
        worst <= 2e-3 && c.f13_alpha[0].norm() <= 1e-10,
        format!("max relative deviation {worst:.2e}, validation {:.2e}", a.normal_form.h.validation.max),
    ));
    let s = &a.amplitude;
    out.push(check(
        "amplitude",
        rel(s.b, 1.3954) <= 2e-3 && rel(s.c, 0.0090) <= 2e-2 && s.d == 1.0 && s.epsilon == -1.0 && a.case == "Ia",
        format!("b = {:.6}, c = {:.6}, d = {}, eps = {}, case {}", s.b, s.c, s.d, s.epsilon, a.case),
    ));
    let map = a.regions(0.2, 200);
    let labels = |alpha| {
        a.predict(alpha, 0.01).map(|pr| pr.attractors.iter().map(|x| (x.kind, x.multiplicity)).collect::<Vec<_>>())
    };
    use crate::amplitude::AttractorKind as K;
    let d3 = labels([0.05, -0.33]);
    let d5 = labels([-0.1, -0.4]);
    out.push(check(
        "regions",
        map.regions.len() == 6
            && d3.as_deref() == Ok(&[(K::InhomogeneousPeriodic, 2)][..])
            && d5.as_deref() == Ok(&[(K::NonconstantSteady, 2)][..]),
        format!("{} regions, D3 {:?}, D5 {:?}", map.regions.len(), d3, d5),
    ));
    if with_simulation {
        use crate::simulate::{run, PatternKind};
        for (alpha, kind) in [([0.05, -0.33], PatternKind::InhomogeneousPeriodic), ([-0.1, -0.4], PatternKind::NonconstantSteady)] {
            let name = format!("simulation at alpha = ({}, {})", alpha[0], alpha[1]);
            match run(&m, a.mu_at(alpha), &m.simulate).map_err(PipelineError::from).and_then(|tr| {
                analyze_pattern(&tr, 0.25).map_err(PipelineError::from)
            }) {
                Ok(r) => out.push(check(
                    &name,
                    r.kind == kind && r.dominant_mode == 5,
                    format!("{:?}, mode {}, amplitude {:.4e}", r.kind, r.dominant_mode, r.dominant_amplitude),
                )),
                Err(e) => out.push(check(&name, false, e.to_string())),
            }
        }
    }
    out
}
