//! Expression trees for reaction and diffusion terms.
//!
//! Expressions are parsed from infix text, differentiated symbolically to any
//! mixed order and evaluated in IEEE double precision. Construction helpers
//! fold constants and drop `0`/`1` identities so repeated derivatives stay small.

mod compile;
mod diff;
mod parse;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use compile::Compiled;
pub use parse::{parse, parse_declared};

/// Symbol values used by [`Expr::evaluate`].
pub type Bindings = BTreeMap<String, f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown symbol `{name}` at byte {offset}")]
    UnknownSymbol { name: String, offset: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("symbol `{0}` has no binding")]
    Unbound(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn apply(self, x: f64) -> Result<f64, ExprError> {
        match self {
            Func::Exp => Ok(x.exp()),
            Func::Ln if x <= 0.0 => Err(ExprError::Domain(format!("ln of non-positive value {x}"))),
            Func::Ln => Ok(x.ln()),
            Func::Sin => Ok(x.sin()),
            Func::Cos => Ok(x.cos()),
            Func::Sqrt if x < 0.0 => Err(ExprError::Domain(format!("sqrt of negative value {x}"))),
            Func::Sqrt => Ok(x.sqrt()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Sym(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn num(x: f64) -> Expr {
        Expr::Num(x)
    }

    pub fn sym(name: &str) -> Expr {
        Expr::Sym(name.to_string())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(x) if *x == 0.0)
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Num(x) if *x == 1.0)
    }

    fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(x) => Some(*x),
            _ => None,
        }
    }

    pub fn neg(e: Expr) -> Expr {
        match e {
            Expr::Num(x) => Expr::Num(-x),
            Expr::Neg(inner) => *inner,
            e => Expr::Neg(Box::new(e)),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_num(), b.as_num()) {
            (Some(x), Some(y)) => Expr::Num(x + y),
            (Some(x), _) if x == 0.0 => b,
            (_, Some(y)) if y == 0.0 => a,
            _ => match b {
                Expr::Neg(inner) => Expr::Sub(Box::new(a), inner),
                b => Expr::Add(Box::new(a), Box::new(b)),
            },
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_num(), b.as_num()) {
            (Some(x), Some(y)) => Expr::Num(x - y),
            (Some(x), _) if x == 0.0 => Expr::neg(b),
            (_, Some(y)) if y == 0.0 => a,
            _ => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_num(), b.as_num()) {
            (Some(x), Some(y)) => Expr::Num(x * y),
            (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Num(0.0),
            (Some(x), _) if x == 1.0 => b,
            (_, Some(y)) if y == 1.0 => a,
            (Some(x), _) if x == -1.0 => Expr::neg(b),
            (_, Some(y)) if y == -1.0 => Expr::neg(a),
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_num(), b.as_num()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::Num(x / y),
            (Some(x), _) if x == 0.0 => Expr::Num(0.0),
            (_, Some(y)) if y == 1.0 => a,
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(base: Expr, n: i32) -> Expr {
        match (base.as_num(), n) {
            (_, 0) => Expr::Num(1.0),
            (_, 1) => base,
            (Some(x), n) if x != 0.0 || n > 0 => Expr::Num(x.powi(n)),
            _ => Expr::Pow(Box::new(base), n),
        }
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        match arg.as_num().map(|x| f.apply(x)) {
            Some(Ok(v)) => Expr::Num(v),
            _ => Expr::Call(f, Box::new(arg)),
        }
    }

    /// True if `name` occurs anywhere in the tree.
    pub fn depends_on(&self, name: &str) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Sym(s) => s == name,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.depends_on(name),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depends_on(name) || b.depends_on(name)
            }
        }
    }

    /// Symbols occurring in the tree, sorted and deduplicated.
    pub fn symbols(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_symbols(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_symbols(&self, out: &mut Vec<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Sym(s) => out.push(s.clone()),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.collect_symbols(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
        }
    }

    /// Replaces every occurrence of the symbol `name` by `with`, simplifying on the way up.
    pub fn substitute(&self, name: &str, with: &Expr) -> Expr {
        self.map_symbols(&|s| (s == name).then(|| with.clone()))
    }

    /// Rebuilds the tree, replacing symbols for which `f` returns a value.
    pub fn map_symbols(&self, f: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Num(x) => Expr::Num(*x),
            Expr::Sym(s) => f(s).unwrap_or_else(|| Expr::Sym(s.clone())),
            Expr::Neg(a) => Expr::neg(a.map_symbols(f)),
            Expr::Add(a, b) => Expr::add(a.map_symbols(f), b.map_symbols(f)),
            Expr::Sub(a, b) => Expr::sub(a.map_symbols(f), b.map_symbols(f)),
            Expr::Mul(a, b) => Expr::mul(a.map_symbols(f), b.map_symbols(f)),
            Expr::Div(a, b) => Expr::div(a.map_symbols(f), b.map_symbols(f)),
            Expr::Pow(a, n) => Expr::pow(a.map_symbols(f), *n),
            Expr::Call(g, a) => Expr::call(*g, a.map_symbols(f)),
        }
    }

    /// Exact symbolic partial derivative with respect to `name`.
    pub fn differentiate(&self, name: &str) -> Expr {
        diff::derivative(self, name)
    }

    /// Mixed partial derivative along `path`, applied left to right.
    pub fn differentiate_path<S: AsRef<str>>(&self, path: &[S]) -> Expr {
        path.iter().fold(self.clone(), |e, s| e.differentiate(s.as_ref()))
    }

    pub fn evaluate(&self, bindings: &Bindings) -> Result<f64, ExprError> {
        self.eval_with(&|s| bindings.get(s).copied())
    }

    /// Evaluates with an arbitrary symbol lookup.
    pub fn eval_with(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64, ExprError> {
        Ok(match self {
            Expr::Num(x) => *x,
            Expr::Sym(s) => lookup(s).ok_or_else(|| ExprError::Unbound(s.clone()))?,
            Expr::Neg(a) => -a.eval_with(lookup)?,
            Expr::Add(a, b) => a.eval_with(lookup)? + b.eval_with(lookup)?,
            Expr::Sub(a, b) => a.eval_with(lookup)? - b.eval_with(lookup)?,
            Expr::Mul(a, b) => a.eval_with(lookup)? * b.eval_with(lookup)?,
            Expr::Div(a, b) => {
                let den = b.eval_with(lookup)?;
                if den == 0.0 {
                    return Err(ExprError::Domain("division by zero".into()));
                }
                a.eval_with(lookup)? / den
            }
            Expr::Pow(a, n) => {
                let x = a.eval_with(lookup)?;
                if x == 0.0 && *n < 0 {
                    return Err(ExprError::Domain("division by zero".into()));
                }
                x.powi(*n)
            }
            Expr::Call(f, a) => f.apply(a.eval_with(lookup)?)?,
        })
    }

    /// Lowers the tree to slot-indexed form for repeated evaluation.
    pub fn compile(&self, slots: &[&str]) -> Result<Compiled, ExprError> {
        Compiled::new(self, slots)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(x) if *x < 0.0 => 3,
            Expr::Num(_) | Expr::Sym(_) | Expr::Call(..) => 5,
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, min_prec: u8) -> fmt::Result {
    if child.precedence() < min_prec || matches!(child, Expr::Num(x) if *x < 0.0) {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) if *x < 0.0 => write!(f, "-{}", -x),
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Sym(s) => f.write_str(s),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, 3)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                write_child(f, a, 1)?;
                f.write_str(if matches!(self, Expr::Add(..)) { " + " } else { " - " })?;
                write_child(f, b, 2)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                write_child(f, a, 2)?;
                f.write_str(if matches!(self, Expr::Mul(..)) { "*" } else { "/" })?;
                write_child(f, b, 3)
            }
            Expr::Pow(a, n) => {
                write_child(f, a, 5)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bind(pairs: &[(&str, f64)]) -> Bindings {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn evaluates_simple_sum() {
        let e = parse("u+v").unwrap();
        assert_eq!(e.evaluate(&bind(&[("u", 1.0), ("v", 2.0)])).unwrap(), 3.0);
        assert_eq!(parse("exp(0)").unwrap().evaluate(&Bindings::new()).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors() {
        let b = bind(&[("u", 0.0)]);
        for text in ["1/u", "ln(u)", "sqrt(u-1)", "u^(-2)"] {
            let e = parse(text).unwrap();
            assert!(matches!(e.evaluate(&b), Err(ExprError::Domain(_))), "{text}");
        }
    }

    #[test]
    fn unbound_symbol_is_reported() {
        let e = parse("u*w").unwrap();
        assert_eq!(e.evaluate(&bind(&[("u", 1.0)])), Err(ExprError::Unbound("w".into())));
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "u*(1-u) - a*u*v/(u+b)",
            "r*v*(1 - v_tau/u_tau)",
            "-u^2 + (-(v)) - (a - b - c)",
            "a/(b*c)/d - -u",
            "exp(-u)^3*sqrt(ln(2+v))/(u^(-2))",
            "0.1 + 1e-7*u - 2.5e10",
        ] {
            let e = parse(text).unwrap();
            let again = parse(&e.to_string()).unwrap();
            assert_eq!(e, again, "{text} -> {e}");
        }
    }

    #[test]
    fn constructors_fold_identities() {
        let u = Expr::sym("u");
        assert_eq!(Expr::mul(Expr::num(0.0), u.clone()), Expr::num(0.0));
        assert_eq!(Expr::add(u.clone(), Expr::num(0.0)), u);
        assert_eq!(Expr::pow(u.clone(), 1), u);
        assert_eq!(Expr::neg(Expr::neg(u.clone())), u);
        assert_eq!(Expr::call(Func::Exp, Expr::num(0.0)), Expr::num(1.0));
    }

    #[test]
    fn substitution_shifts_symbols() {
        let e = parse("u*(1-u)").unwrap();
        let shifted = e.substitute("u", &parse("u + 0.5").unwrap());
        let v = shifted.evaluate(&bind(&[("u", 0.0)])).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
    }
}
