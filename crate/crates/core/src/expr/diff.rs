use super::{Expr, Func};

pub(super) fn derivative(e: &Expr, x: &str) -> Expr {
    if !e.depends_on(x) {
        return Expr::num(0.0);
    }
    match e {
        Expr::Num(_) => Expr::num(0.0),
        Expr::Sym(s) => Expr::num(if s == x { 1.0 } else { 0.0 }),
        Expr::Neg(a) => Expr::neg(derivative(a, x)),
        Expr::Add(a, b) => Expr::add(derivative(a, x), derivative(b, x)),
        Expr::Sub(a, b) => Expr::sub(derivative(a, x), derivative(b, x)),
        Expr::Mul(a, b) => Expr::add(
            Expr::mul(derivative(a, x), (**b).clone()),
            Expr::mul((**a).clone(), derivative(b, x)),
        ),
        Expr::Div(a, b) => {
            let da = derivative(a, x);
            if !b.depends_on(x) {
                return Expr::div(da, (**b).clone());
            }
            let db = derivative(b, x);
            Expr::div(
                Expr::sub(
                    Expr::mul(da, (**b).clone()),
                    Expr::mul((**a).clone(), db),
                ),
                Expr::pow((**b).clone(), 2),
            )
        }
        Expr::Pow(a, n) => Expr::mul(
            Expr::mul(Expr::num(*n as f64), Expr::pow((**a).clone(), n - 1)),
            derivative(a, x),
        ),
        Expr::Call(f, a) => {
            let inner = (**a).clone();
            let outer = match f {
                Func::Exp => Expr::call(Func::Exp, inner),
                Func::Ln => Expr::div(Expr::num(1.0), inner),
                Func::Sin => Expr::call(Func::Cos, inner),
                Func::Cos => Expr::neg(Expr::call(Func::Sin, inner)),
                Func::Sqrt => Expr::div(
                    Expr::num(1.0),
                    Expr::mul(Expr::num(2.0), Expr::call(Func::Sqrt, inner)),
                ),
            };
            Expr::mul(outer, derivative(a, x))
        }
    }
}
