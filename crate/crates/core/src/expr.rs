//! A small arithmetic expression grammar for user-defined potentials.
//!
//! Operators `+ - * / ^`, functions `sin cos exp abs`, the variable `x` and
//! numeric literals. Expressions can be differentiated symbolically, which is
//! how loaded models get analytic gradients.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Exponentiation; differentiation requires a constant exponent.
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Abs(Box<Expr>),
    /// Produced only by differentiation of `abs`; not part of the grammar.
    Signum(Box<Expr>),
}

impl Expr {
    /// Parse the grammar. `pointer` names the JSON location for error reports.
    pub fn parse(src: &str, pointer: &str) -> Result<Expr> {
        Parser::new(src, pointer).parse_full()
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::Var => x,
            Expr::Neg(e) => -e.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => a.eval(x).powf(b.eval(x)),
            Expr::Sin(e) => e.eval(x).sin(),
            Expr::Cos(e) => e.eval(x).cos(),
            Expr::Exp(e) => e.eval(x).exp(),
            Expr::Abs(e) => e.eval(x).abs(),
            Expr::Signum(e) => {
                let v = e.eval(x);
                if v == 0.0 {
                    0.0
                } else {
                    v.signum()
                }
            }
        }
    }

    /// Symbolic derivative. `Pow` needs a constant exponent; everything else
    /// in the grammar differentiates cleanly.
    pub fn diff(&self, pointer: &str) -> Result<Expr> {
        use Expr::*;
        Ok(match self {
            Num(_) => Num(0.0),
            Var => Num(1.0),
            Neg(e) => Neg(Box::new(e.diff(pointer)?)),
            Add(a, b) => Add(Box::new(a.diff(pointer)?), Box::new(b.diff(pointer)?)),
            Sub(a, b) => Sub(Box::new(a.diff(pointer)?), Box::new(b.diff(pointer)?)),
            Mul(a, b) => Add(
                Box::new(Mul(Box::new(a.diff(pointer)?), b.clone())),
                Box::new(Mul(a.clone(), Box::new(b.diff(pointer)?))),
            ),
            Div(a, b) => Div(
                Box::new(Sub(
                    Box::new(Mul(Box::new(a.diff(pointer)?), b.clone())),
                    Box::new(Mul(a.clone(), Box::new(b.diff(pointer)?))),
                )),
                Box::new(Pow(b.clone(), Box::new(Num(2.0)))),
            ),
            Pow(base, exp) => match exp.as_ref() {
                Num(c) => Mul(
                    Box::new(Mul(
                        Box::new(Num(*c)),
                        Box::new(Pow(base.clone(), Box::new(Num(c - 1.0)))),
                    )),
                    Box::new(base.diff(pointer)?),
                ),
                _ => {
                    return Err(Error::Parse {
                        pointer: pointer.to_string(),
                        message: "cannot differentiate `^` with a non-constant exponent"
                            .to_string(),
                    })
                }
            },
            Sin(e) => Mul(Box::new(Cos(e.clone())), Box::new(e.diff(pointer)?)),
            Cos(e) => Neg(Box::new(Mul(
                Box::new(Sin(e.clone())),
                Box::new(e.diff(pointer)?),
            ))),
            Exp(e) => Mul(Box::new(Exp(e.clone())), Box::new(e.diff(pointer)?)),
            Abs(e) => Mul(Box::new(Signum(e.clone())), Box::new(e.diff(pointer)?)),
            Signum(_) => Num(0.0),
        })
    }

    /// Wrap into a shareable closure.
    pub fn into_fn(self) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
        Arc::new(move |x| self.eval(x))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c}"),
            Expr::Var => write!(f, "x"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Sin(e) => write!(f, "sin({e})"),
            Expr::Cos(e) => write!(f, "cos({e})"),
            Expr::Exp(e) => write!(f, "exp({e})"),
            Expr::Abs(e) => write!(f, "abs({e})"),
            Expr::Signum(e) => write!(f, "signum({e})"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    pointer: &'a str,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, pointer: &'a str) -> Self {
        Parser {
            src: src.as_bytes(),
            pos: 0,
            pointer,
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            pointer: self.pointer.to_string(),
            message: message.into(),
        }
    }

    fn parse_full(mut self) -> Result<Expr> {
        let e = self.expr()?;
        self.skip_ws();
        if self.pos != self.src.len() {
            return Err(self.err(format!(
                "unexpected trailing input at byte {}: `{}`",
                self.pos,
                String::from_utf8_lossy(&self.src[self.pos..])
            )));
        }
        Ok(e)
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // term := unary (('*' | '/') unary)*
    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    // power := atom ('^' unary)?   (right-associative)
    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => Err(self.err(format!("unexpected character `{}`", c as char))),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E')
                && self.pos > start
                && self
                    .src
                    .get(self.pos + 1)
                    .is_some_and(|&n| n.is_ascii_digit() || n == b'+' || n == b'-')
            {
                self.pos += 2;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| self.err(format!("invalid number `{text}`")))
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if name == "x" {
            return Ok(Expr::Var);
        }
        if self.peek() != Some(b'(') {
            return Err(self.err(format!("unknown token `{name}`")));
        }
        self.pos += 1;
        let arg = Box::new(self.expr()?);
        if self.peek() != Some(b')') {
            return Err(self.err(format!("expected `)` after argument of `{name}`")));
        }
        self.pos += 1;
        Ok(match name {
            "sin" => Expr::Sin(arg),
            "cos" => Expr::Cos(arg),
            "exp" => Expr::Exp(arg),
            "abs" => Expr::Abs(arg),
            _ => return Err(self.err(format!("unknown function `{name}`"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(src: &str) -> Expr {
        Expr::parse(src, "/test").unwrap()
    }

    #[test]
    fn evaluates_dawson_potential() {
        let e = p("x^4/4 - x^2/2");
        assert_relative_eq!(e.eval(1.0), -0.25);
        assert_relative_eq!(e.eval(2.0), 2.0);
    }

    #[test]
    fn precedence_and_unary_minus() {
        assert_relative_eq!(p("-x^2").eval(3.0), -9.0);
        assert_relative_eq!(p("2*x + 3*x^2").eval(2.0), 16.0);
        assert_relative_eq!(p("2^3^1").eval(0.0), 8.0);
        assert_relative_eq!(p("(1+2)*(3-5)").eval(0.0), -6.0);
        assert_relative_eq!(p("1e-2 * x").eval(4.0), 0.04);
    }

    #[test]
    fn functions() {
        let e = p("sin(x)^2 + cos(x)^2");
        assert_relative_eq!(e.eval(0.77), 1.0, max_relative = 1e-15);
        assert_relative_eq!(p("exp(abs(x))").eval(-1.0), std::f64::consts::E);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for src in ["x^4/4 - x^2/2", "sin(x)*x - cos(2*x)", "exp(-x^2/2)", "abs(x)^3"] {
            let e = p(src);
            let d = e.diff("/test").unwrap();
            for &x in &[-1.7f64, -0.4, 0.9, 2.3] {
                let h = 1e-6 * (1.0 + x.abs());
                let fd = (e.eval(x + h) - e.eval(x - h)) / (2.0 * h);
                assert_relative_eq!(d.eval(x), fd, max_relative = 1e-6, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn unknown_token_named_in_error() {
        let err = Expr::parse("tanh(x)", "/V0").unwrap_err();
        match err {
            Error::Parse { pointer, message } => {
                assert_eq!(pointer, "/V0");
                assert!(message.contains("tanh"), "{message}");
            }
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn trailing_garbage_rejected() {
        assert!(Expr::parse("x + ", "/t").is_err());
        assert!(Expr::parse("x) ", "/t").is_err());
        assert!(Expr::parse("x y", "/t").is_err());
    }

    #[test]
    fn nonconstant_exponent_cannot_differentiate() {
        let e = p("x^x");
        assert!(e.diff("/t").is_err());
    }
}
