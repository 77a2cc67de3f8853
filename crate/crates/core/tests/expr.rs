use proptest::prelude::*;
use turing_hopf::expr::{parse, Bindings, Expr};

const VARS: [&str; 3] = ["x", "y", "z"];

/// Random expressions that are smooth and finite on the whole real cube.
fn smooth_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        Just("z".to_string()),
        (0.5f64..3.0).prop_map(|c| format!("{c:.3}")),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} / (2 + ({b})^2))")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("exp(sin({a}))")),
            inner.clone().prop_map(|a| format!("ln(2 + ({a})^2)")),
            inner.clone().prop_map(|a| format!("sqrt(1 + ({a})^2)")),
            inner.clone().prop_map(|a| format!("({a})^2")),
            inner.clone().prop_map(|a| format!("({a})^3")),
            inner.prop_map(|a| format!("(1 + ({a})^2)^-1")),
        ]
    })
}

fn bind(p: [f64; 3]) -> Bindings {
    VARS.iter().zip(p).map(|(k, v)| (k.to_string(), v)).collect()
}

/// Five-point central difference of `e` along variable `var`.
fn central_difference(e: &Expr, p: [f64; 3], var: usize) -> f64 {
    let h = 1e-3;
    let at = |s: f64| {
        let mut q = p;
        q[var] += s * h;
        e.evaluate(&bind(q)).unwrap()
    };
    (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h)
}

fn close(sym: f64, fd: f64, scale: f64) -> bool {
    (sym - fd).abs() <= 1e-6 * scale.max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn first_derivatives_match_finite_differences(
        text in smooth_expr(),
        p in prop::array::uniform3(-1.0f64..1.0),
        var in 0usize..3,
    ) {
        let e = parse(&text).unwrap();
        let d = e.differentiate(VARS[var]);
        let sym = d.evaluate(&bind(p)).unwrap();
        let fd = central_difference(&e, p, var);
        let scale = e.evaluate(&bind(p)).unwrap().abs().max(sym.abs());
        prop_assert!(close(sym, fd, scale), "{text}: {sym} vs {fd}");
    }

    #[test]
    fn mixed_derivatives_match_finite_differences(
        text in smooth_expr(),
        p in prop::array::uniform3(-1.0f64..1.0),
        path in prop::array::uniform3(0usize..3),
    ) {
        let e = parse(&text).unwrap();
        let lower = e.differentiate_path(&[VARS[path[0]], VARS[path[1]]]);
        let full = e.differentiate_path(&[VARS[path[0]], VARS[path[1]], VARS[path[2]]]);
        let sym = full.evaluate(&bind(p)).unwrap();
        let fd = central_difference(&lower, p, path[2]);
        let scale = lower.evaluate(&bind(p)).unwrap().abs().max(sym.abs());
        prop_assert!(close(sym, fd, scale), "{text} along {path:?}: {sym} vs {fd}");
    }

    #[test]
    fn derivatives_commute(text in smooth_expr(), p in prop::array::uniform3(-1.0f64..1.0)) {
        let e = parse(&text).unwrap();
        let xy = e.differentiate_path(&["x", "y"]).evaluate(&bind(p)).unwrap();
        let yx = e.differentiate_path(&["y", "x"]).evaluate(&bind(p)).unwrap();
        prop_assert!((xy - yx).abs() <= 1e-9 * xy.abs().max(1.0));
    }

    #[test]
    fn display_round_trips(text in smooth_expr(), p in prop::array::uniform3(-1.0f64..1.0)) {
        let e = parse(&text).unwrap();
        let again = parse(&e.to_string()).unwrap();
        let (a, b) = (e.evaluate(&bind(p)).unwrap(), again.evaluate(&bind(p)).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{e}");
    }

    #[test]
    fn compiled_matches_tree_evaluation(text in smooth_expr(), p in prop::array::uniform3(-1.0f64..1.0)) {
        let e = parse(&text).unwrap();
        let c = e.compile(&VARS).unwrap();
        prop_assert_eq!(c.eval(&p), e.evaluate(&bind(p)).unwrap());
    }
}

#[test]
fn syntax_errors_report_offsets() {
    assert!(parse("u*(1 - u").is_err());
    assert!(parse("2 +* v").is_err());
    assert!(parse("sin(u) v").is_err());
}

#[test]
fn holling_tanner_reaction_derivative() {
    let g = parse("r*v*(1 - v_tau/u_tau)").unwrap();
    let d = g.differentiate("u_tau");
    let b: Bindings = [("r", 2.0), ("v", 0.3), ("v_tau", 0.4), ("u_tau", 0.5)]
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    // d/du_tau of r v (1 - v_tau / u_tau) = r v v_tau / u_tau^2
    assert!((d.evaluate(&b).unwrap() - 2.0 * 0.3 * 0.4 / 0.25).abs() < 1e-14);
}
