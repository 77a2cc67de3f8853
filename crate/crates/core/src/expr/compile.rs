use super::{Expr, ExprError, Func};

/// Expression with symbols resolved to slot indices, for hot loops.
///
/// Evaluation follows plain IEEE semantics: domain violations produce
/// non-finite values instead of errors, and callers check finiteness.
#[derive(Debug, Clone, PartialEq)]
pub enum Compiled {
    Num(f64),
    Slot(usize),
    Neg(Box<Compiled>),
    Add(Box<Compiled>, Box<Compiled>),
    Sub(Box<Compiled>, Box<Compiled>),
    Mul(Box<Compiled>, Box<Compiled>),
    Div(Box<Compiled>, Box<Compiled>),
    Pow(Box<Compiled>, i32),
    Call(Func, Box<Compiled>),
}

impl Compiled {
    pub(super) fn new(e: &Expr, slots: &[&str]) -> Result<Compiled, ExprError> {
        let rec = |x: &Expr| Compiled::new(x, slots).map(Box::new);
        Ok(match e {
            Expr::Num(x) => Compiled::Num(*x),
            Expr::Sym(s) => Compiled::Slot(
                slots
                    .iter()
                    .position(|n| n == s)
                    .ok_or_else(|| ExprError::Unbound(s.clone()))?,
            ),
            Expr::Neg(a) => Compiled::Neg(rec(a)?),
            Expr::Add(a, b) => Compiled::Add(rec(a)?, rec(b)?),
            Expr::Sub(a, b) => Compiled::Sub(rec(a)?, rec(b)?),
            Expr::Mul(a, b) => Compiled::Mul(rec(a)?, rec(b)?),
            Expr::Div(a, b) => Compiled::Div(rec(a)?, rec(b)?),
            Expr::Pow(a, n) => Compiled::Pow(rec(a)?, *n),
            Expr::Call(f, a) => Compiled::Call(*f, rec(a)?),
        })
    }

    #[inline]
    pub fn eval(&self, slots: &[f64]) -> f64 {
        match self {
            Compiled::Num(x) => *x,
            Compiled::Slot(i) => slots[*i],
            Compiled::Neg(a) => -a.eval(slots),
            Compiled::Add(a, b) => a.eval(slots) + b.eval(slots),
            Compiled::Sub(a, b) => a.eval(slots) - b.eval(slots),
            Compiled::Mul(a, b) => a.eval(slots) * b.eval(slots),
            Compiled::Div(a, b) => a.eval(slots) / b.eval(slots),
            Compiled::Pow(a, n) => a.eval(slots).powi(*n),
            Compiled::Call(f, a) => {
                let x = a.eval(slots);
                match f {
                    Func::Exp => x.exp(),
                    Func::Ln => x.ln(),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Sqrt => x.sqrt(),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    #[test]
    fn compiled_matches_tree_evaluation() {
        let e = parse("u*(1-u) - a*u*v/(u+b) + sqrt(exp(v))^2").unwrap();
        let c = e.compile(&["u", "v", "a", "b"]).unwrap();
        let vals = [0.3, 0.2, 1.0, 0.1];
        let bind = [("u", 0.3), ("v", 0.2), ("a", 1.0), ("b", 0.1)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        assert_eq!(c.eval(&vals), e.evaluate(&bind).unwrap());
    }

    #[test]
    fn missing_slot_is_an_error() {
        assert!(parse("u+w").unwrap().compile(&["u"]).is_err());
    }
}
