mod common;

use proptest::prelude::*;
use turing_hopf::model::{load_model, ModelError, Mu};

/// Richardson-extrapolated central difference of the reaction along `dirs`.
fn reaction_fd(m: &turing_hopf::model::ModelSpec, mu: Mu, dirs: &[usize]) -> [f64; 2] {
    let (a, b) = (central(m, mu, dirs, 2e-3), central(m, mu, dirs, 1e-3));
    [(4.0 * b[0] - a[0]) / 3.0, (4.0 * b[1] - a[1]) / 3.0]
}

/// Central difference of the reaction along state directions `dirs`, order 1 to 3.
fn central(m: &turing_hopf::model::ModelSpec, mu: Mu, dirs: &[usize], h: f64) -> [f64; 2] {
    let eval = |shifts: &[f64]| {
        let mut s = [0.0; 4];
        for (d, x) in dirs.iter().zip(shifts) {
            s[*d] += x;
        }
        m.reaction(&s, mu).unwrap()
    };
    let signs: &[&[f64]] = match dirs.len() {
        1 => &[&[1.0], &[-1.0]],
        2 => &[&[1.0, 1.0], &[1.0, -1.0], &[-1.0, 1.0], &[-1.0, -1.0]],
        _ => &[
            &[1.0, 1.0, 1.0],
            &[1.0, 1.0, -1.0],
            &[1.0, -1.0, 1.0],
            &[1.0, -1.0, -1.0],
            &[-1.0, 1.0, 1.0],
            &[-1.0, 1.0, -1.0],
            &[-1.0, -1.0, 1.0],
            &[-1.0, -1.0, -1.0],
        ],
    };
    let mut out = [0.0; 2];
    for s in signs {
        let weight: f64 = s.iter().product();
        let shifted: Vec<f64> = s.iter().map(|x| x * h).collect();
        let v = eval(&shifted);
        out[0] += weight * v[0];
        out[1] += weight * v[1];
    }
    let denom = (2.0 * h).powi(dirs.len() as i32);
    [out[0] / denom, out[1] / denom]
}

#[test]
fn equilibrium_and_linearization() {
    let m = common::holling_tanner();
    let (a, b) = (1.0, 0.1);
    let ue = m.shift[0];
    assert!((ue * ue + (a + b - 1.0) * ue - b).abs() < 1e-14);
    assert!((ue - 0.270).abs() < 5e-4);
    assert_eq!(m.shift[0], m.shift[1]);
    let lp = m.linear_part([0.4567, 2.8646]).unwrap();
    let expect_a = [[0.2625, -0.7298], [0.0, 0.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((lp.a[(i, j)] - expect_a[i][j]).abs() < 1e-4, "A[{i}][{j}] = {}", lp.a[(i, j)]);
        }
    }
    // The delayed part is r (v_tau - u_tau) in the v equation.
    assert!((lp.b[(1, 0)] - 2.8646).abs() < 1e-12 && (lp.b[(1, 1)] + 2.8646).abs() < 1e-12);
    assert_eq!(lp.b[(0, 0)], 0.0);
    assert_eq!((lp.d[(0, 0)], lp.d[(1, 1)]), (0.1, 10.0));
}

#[test]
fn bundle_matches_finite_differences() {
    let m = common::holling_tanner();
    let mu = [0.4567, 2.8646];
    let bundle = m.derivative_bundle(mu).unwrap();
    for i in 0..4 {
        let fd = reaction_fd(&m, mu, &[i]);
        for h in 0..2 {
            assert!((bundle.first[h][i] - fd[h]).abs() < 1e-7 * (1.0 + fd[h].abs()));
        }
        for j in 0..4 {
            let fd = reaction_fd(&m, mu, &[i, j]);
            for h in 0..2 {
                assert!((bundle.second[h][i][j] - fd[h]).abs() < 1e-6 * (1.0 + fd[h].abs()), "{h} {i}{j}");
            }
            for k in 0..4 {
                let fd = reaction_fd(&m, mu, &[i, j, k]);
                for h in 0..2 {
                    let x = bundle.third[h][i][j][k];
                    assert!((x - fd[h]).abs() < 1e-5 * (1.0 + fd[h].abs()), "{h} {i}{j}{k}: {x} vs {}", fd[h]);
                }
            }
        }
    }
}

#[test]
fn parameter_derivatives_match_finite_differences() {
    let u = common::holling_tanner().unit_delay();
    let mu = [0.4567, 2.8646];
    let lp = u.linear_part(mu).unwrap();
    let h = 1e-6;
    for p in 0..2 {
        let mut up = mu;
        let mut dn = mu;
        up[p] += h;
        dn[p] -= h;
        let (a, b) = (u.linear_part(up).unwrap(), u.linear_part(dn).unwrap());
        let da = (a.a - b.a) / (2.0 * h);
        let db = (a.b - b.b) / (2.0 * h);
        let dd = (a.d - b.d) / (2.0 * h);
        assert!((da - lp.da[p]).abs().max() < 1e-7);
        assert!((db - lp.db[p]).abs().max() < 1e-7);
        assert!((dd - lp.dd[p]).abs().max() < 1e-7);
    }
}

#[test]
fn rescaled_model_scales_by_the_delay() {
    let m = common::holling_tanner();
    let u = m.unit_delay();
    let mu = [0.5, 3.0];
    let (lo, lu) = (m.linear_part(mu).unwrap(), u.linear_part(mu).unwrap());
    assert!((lu.a - lo.a * 0.5).abs().max() < 1e-15);
    assert!((lu.b - lo.b * 0.5).abs().max() < 1e-15);
    assert!((lu.d - lo.d * 0.5).abs().max() < 1e-15);
    assert_eq!(m.delay_at(mu), 0.5);
    assert_eq!(u.delay_at(mu), 1.0);
    assert!(matches!(u.rescale_delay(), Err(ModelError::NotApplicable)));
}

#[test]
fn model_file_errors() {
    let bad_shift = common::holling_tanner_with(1.0, 0.1, 0.1, 10.0).replace("u = \"ue\"", "u = \"ue + 0.1\"");
    assert!(matches!(load_model(&bad_shift), Err(ModelError::EquilibriumViolation { .. })));
    let negative = common::holling_tanner_with(1.0, 0.1, -0.1, 10.0);
    assert!(matches!(load_model(&negative), Err(ModelError::NonPositiveDiffusion { which: "d1", .. })));
    let unknown = common::holling_tanner_with(1.0, 0.1, 0.1, 10.0).replace("a*u*v", "q*u*v");
    assert!(matches!(load_model(&unknown), Err(ModelError::Expr { .. })));
    let extra = common::holling_tanner_with(1.0, 0.1, 0.1, 10.0) + "\n[bogus]\nx = 1\n";
    assert!(matches!(load_model(&extra), Err(ModelError::Parse(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn text_form_round_trips(a in 0.8f64..1.2, b in 0.05f64..0.15, d1 in 0.05f64..0.2, d2 in 5.0f64..15.0) {
        let m = load_model(&common::holling_tanner_with(a, b, d1, d2)).unwrap();
        let again = load_model(&m.to_toml()).unwrap();
        let mu = [0.45, 2.9];
        let s = [0.01, -0.02, 0.015, 0.005];
        prop_assert_eq!(m.reaction(&s, mu).unwrap(), again.reaction(&s, mu).unwrap());
        prop_assert_eq!(m.diffusion(mu).unwrap(), again.diffusion(mu).unwrap());
        prop_assert_eq!(m.delay_at(mu), again.delay_at(mu));
    }
}
