#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use turing_hopf::model::{load_model, ModelSpec};
use turing_hopf::pipeline::Analysis;
use turing_hopf::HOLLING_TANNER;

pub fn holling_tanner() -> ModelSpec {
    load_model(HOLLING_TANNER).unwrap()
}

pub fn analysis() -> Analysis {
    Analysis::run(&holling_tanner()).unwrap()
}

/// Holling-Tanner text with the given constants and diffusion coefficients.
pub fn holling_tanner_with(a: f64, b: f64, d1: f64, d2: f64) -> String {
    format!(
        r#"
[model]
name = "holling-tanner-variant"
f = "u*(1 - u) - a*u*v/(u + b)"
g = "r*v*(1 - v_tau/u_tau)"
d1 = {d1:?}
d2 = {d2:?}
l = 5

[constants]
a = {a:?}
b = {b:?}
ue = "(-(a + b - 1) + sqrt((a + b - 1)^2 + 4*b))/2"

[shift]
u = "ue"
v = "ue"

[parameters]
tau = 0.4567
r = 2.8646

[delay]
mode = "parameter"
parameter = "tau"

[search]
box = [[0.1, 1.0], [1.0, 5.0]]
n_max = 10
"#
    )
}

/// Models near the bundled one with `a`, `b`, `d1`, `d2` each moved by up to 10%.
pub fn perturbed_models(seed: u64, count: usize) -> Vec<ModelSpec> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut jitter = |x: f64| x * (1.0 + rng.random_range(-0.1..0.1));
            let text = holling_tanner_with(jitter(1.0), jitter(0.1), jitter(0.1), jitter(10.0));
            load_model(&text).unwrap()
        })
        .collect()
}

/// Composite trapezoid rule on `[a, b]` with `n` panels.
pub fn trapezoid<T>(a: f64, b: f64, n: usize, f: impl Fn(f64) -> T) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let h = (b - a) / n as f64;
    let mut s = (f(a) + f(b)) * 0.5;
    for i in 1..n {
        s = s + f(a + i as f64 * h);
    }
    s * h
}
