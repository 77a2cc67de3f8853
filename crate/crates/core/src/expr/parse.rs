//! Recursive-descent parser.
//!
//! ```text
//! expr  := term (("+" | "-") term)*
//! term  := unary (("*" | "/") unary)*
//! unary := ("-" | "+") unary | power
//! power := atom ("^" int | "^" "(" int ")")?
//! atom  := number | name | name "(" expr ")" | "(" expr ")"
//! int   := "-"? digits
//! ```

use super::{Expr, ExprError, Func};

/// Parses `text`, accepting any identifier as a symbol.
pub fn parse(text: &str) -> Result<Expr, ExprError> {
    Parser::new(text, None).run()
}

/// Parses `text`, rejecting identifiers that are not in `declared`.
pub fn parse_declared<S: AsRef<str>>(text: &str, declared: &[S]) -> Result<Expr, ExprError> {
    let names: Vec<&str> = declared.iter().map(|s| s.as_ref()).collect();
    Parser::new(text, Some(names)).run()
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    declared: Option<Vec<&'a str>>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, declared: Option<Vec<&'a str>>) -> Self {
        Parser { src, pos: 0, declared }
    }

    fn run(mut self) -> Result<Expr, ExprError> {
        let e = self.expr()?;
        self.skip_ws();
        if self.pos < self.src.len() {
            return Err(self.error("unexpected trailing input"));
        }
        Ok(e)
    }

    fn error(&self, message: &str) -> ExprError {
        ExprError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat('-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let exponent = if self.eat('(') {
            let n = self.integer()?;
            self.expect(')')?;
            n
        } else {
            self.integer()?
        };
        Ok(Expr::Pow(Box::new(base), exponent))
    }

    fn integer(&mut self) -> Result<i32, ExprError> {
        self.skip_ws();
        let start = self.pos;
        let negative = self.eat('-');
        self.skip_ws();
        let digits_start = self.pos;
        let digits = self.src[self.pos..].bytes().take_while(u8::is_ascii_digit).count();
        self.pos += digits;
        if digits == 0 {
            self.pos = start;
            return Err(self.error("exponent must be an integer literal"));
        }
        if matches!(self.src[self.pos..].chars().next(), Some('.' | 'e' | 'E')) {
            self.pos = start;
            return Err(self.error("exponent must be an integer literal"));
        }
        let value: i32 = self.src[digits_start..self.pos].parse().map_err(|_| {
            ExprError::Syntax { offset: start, message: "exponent out of range".into() }
        })?;
        Ok(if negative { -value } else { value })
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => self.name(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut end = start;
        while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
            end += 1;
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut k = end + 1;
            if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                k += 1;
            }
            if k < bytes.len() && bytes[k].is_ascii_digit() {
                while k < bytes.len() && bytes[k].is_ascii_digit() {
                    k += 1;
                }
                end = k;
            }
        }
        let value: f64 = self.src[start..end]
            .parse()
            .map_err(|_| self.error("malformed number"))?;
        self.pos = end;
        Ok(Expr::Num(value))
    }

    fn name(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let len = self.src[start..]
            .bytes()
            .take_while(|b| b.is_ascii_alphanumeric() || *b == b'_')
            .count();
        let name = &self.src[start..start + len];
        self.pos += len;
        if self.peek() == Some('(') {
            let func = Func::from_name(name).ok_or(ExprError::Syntax {
                offset: start,
                message: format!("unknown function `{name}`"),
            })?;
            self.pos += 1;
            let arg = self.expr()?;
            self.expect(')')?;
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        if let Some(declared) = &self.declared {
            if !declared.contains(&name) {
                return Err(ExprError::UnknownSymbol { name: name.to_string(), offset: start });
            }
        }
        Ok(Expr::Sym(name.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_prey_reaction() {
        let e = parse("u*(1-u) - a*u*v/(u+b)").unwrap();
        assert_eq!(e.symbols(), vec!["a", "b", "u", "v"]);
    }

    #[test]
    fn parses_delayed_symbols() {
        let e = parse_declared("r*v*(1 - v_tau/u_tau)", &["u", "v", "u_tau", "v_tau", "r"]).unwrap();
        assert!(e.depends_on("u_tau") && e.depends_on("v_tau"));
    }

    #[test]
    fn zero_is_constant() {
        assert_eq!(parse("0").unwrap(), Expr::Num(0.0));
        assert_eq!(parse("  0 ").unwrap(), Expr::Num(0.0));
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(parse("-u^2").unwrap(), parse("-(u^2)").unwrap());
        assert_eq!(parse("a-b-c").unwrap(), parse("(a-b)-c").unwrap());
        assert_eq!(parse("a/b/c").unwrap(), parse("(a/b)/c").unwrap());
        assert_ne!(parse("a-b-c").unwrap(), parse("a-(b-c)").unwrap());
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        let cases = [("u +* v", 3), ("u*(1-u", 6), ("u^2.5", 2), ("foo(u)", 0), ("u v", 2), ("", 0)];
        for (text, offset) in cases {
            match parse(text) {
                Err(ExprError::Syntax { offset: got, .. }) => assert_eq!(got, offset, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn unknown_symbol_is_rejected() {
        let err = parse_declared("u + w", &["u", "v"]).unwrap_err();
        assert_eq!(err, ExprError::UnknownSymbol { name: "w".into(), offset: 4 });
    }

    #[test]
    fn negative_integer_exponents() {
        assert_eq!(parse("u^-2").unwrap(), parse("u^(-2)").unwrap());
        assert_eq!(parse("u^(-2)").unwrap(), Expr::Pow(Box::new(Expr::sym("u")), -2));
    }
}
