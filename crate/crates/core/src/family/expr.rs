//! Expression language for coefficient families.
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := factor (('*' | '/') factor)*
//! factor   := '-' factor | power
//! power    := atom ('^' exponent)?
//! exponent := '-' exponent | atom
//! atom     := 'n' | decimal | '(' expr ')' | 'pow' '(' expr ',' expr ')'
//! ```
//!
//! Literals are non-negative decimals and are kept exactly. Exponents are
//! evaluated in the active scalar type, so `2^n` and `2^(2*n-1)` are exact in
//! rational mode while `n^0.5` only evaluates in float mode.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::scalar::{Rational, Scalar, ScalarError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Index,
    Literal(Rational),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at offset {offset}: {message}")]
pub struct SyntaxError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("evaluation failed at n = {index}: {source}")]
pub struct EvalError {
    pub index: i64,
    #[source]
    pub source: ScalarError,
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, SyntaxError> {
        let mut p = Parser { src: text.as_bytes(), pos: 0 };
        p.skip_ws();
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn literal(value: Rational) -> Expr {
        Expr::Literal(value)
    }

    pub fn eval<S: Scalar>(&self, n: i64) -> Result<S, EvalError> {
        self.eval_inner(n).map_err(|source| EvalError { index: n, source })
    }

    fn eval_inner<S: Scalar>(&self, n: i64) -> Result<S, ScalarError> {
        Ok(match self {
            Expr::Index => S::from_int(n),
            Expr::Literal(r) => S::from_rational(r),
            Expr::Neg(x) => -x.eval_inner::<S>(n)?,
            Expr::Add(l, r) => l.eval_inner::<S>(n)? + r.eval_inner::<S>(n)?,
            Expr::Sub(l, r) => l.eval_inner::<S>(n)? - r.eval_inner::<S>(n)?,
            Expr::Mul(l, r) => l.eval_inner::<S>(n)? * r.eval_inner::<S>(n)?,
            Expr::Div(l, r) => l.eval_inner::<S>(n)?.checked_div(&r.eval_inner::<S>(n)?)?,
            Expr::Pow(b, e) => b.eval_inner::<S>(n)?.checked_pow(&e.eval_inner::<S>(n)?)?,
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            Expr::Literal(r) if !is_plain_decimal(r) => 2,
            Expr::Index | Expr::Literal(_) => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            f.write_str("(")?;
            self.write_at(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Expr::Index => f.write_str("n"),
            Expr::Literal(r) => write_literal(f, r),
            Expr::Neg(x) => {
                f.write_str("-")?;
                x.write_at(f, 3)
            }
            Expr::Add(l, r) => binary(f, l, "+", r, 1, 2),
            Expr::Sub(l, r) => binary(f, l, "-", r, 1, 2),
            Expr::Mul(l, r) => binary(f, l, "*", r, 2, 3),
            Expr::Div(l, r) => binary(f, l, "/", r, 2, 3),
            Expr::Pow(b, e) => {
                b.write_at(f, 5)?;
                f.write_str("^")?;
                write_exponent(f, e)
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

fn binary(f: &mut fmt::Formatter<'_>, l: &Expr, op: &str, r: &Expr, lp: u8, rp: u8) -> fmt::Result {
    l.write_at(f, lp)?;
    f.write_str(op)?;
    r.write_at(f, rp)
}

fn write_exponent(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Neg(x) => {
            f.write_str("-")?;
            write_exponent(f, x)
        }
        other => other.write_at(f, 5),
    }
}

/// Non-negative with a terminating decimal expansion.
fn is_plain_decimal(r: &Rational) -> bool {
    if r.is_negative() {
        return false;
    }
    let mut d = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&d % &two).is_zero() {
        d /= &two;
    }
    while (&d % &five).is_zero() {
        d /= &five;
    }
    d.is_one()
}

fn write_literal(f: &mut fmt::Formatter<'_>, r: &Rational) -> fmt::Result {
    if !is_plain_decimal(r) {
        if r.is_negative() {
            return write!(f, "-{}/{}", r.numer().abs(), r.denom());
        }
        return write!(f, "{}/{}", r.numer(), r.denom());
    }
    if r.is_integer() {
        return write!(f, "{}", r.numer());
    }
    // Scale by powers of ten until integral; the digit count is the scale.
    let ten = Rational::from_integer(BigInt::from(10));
    let mut scaled = r.clone();
    let mut digits = 0usize;
    while !scaled.is_integer() {
        scaled *= &ten;
        digits += 1;
    }
    let s = scaled.to_integer().to_string();
    let s = format!("{s:0>width$}", width = digits + 1);
    let (int, frac) = s.split_at(s.len() - digits);
    write!(f, "{int}.{frac}")
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> SyntaxError {
        SyntaxError { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), SyntaxError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.exponent()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.exponent()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek() {
            Some(b'n') => {
                self.pos += 1;
                self.skip_ws();
                Ok(Expr::Index)
            }
            Some(b'(') => {
                self.eat(b'(');
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(b'p') if self.src[self.pos..].starts_with(b"pow") => {
                self.pos += 3;
                self.skip_ws();
                self.expect(b'(')?;
                let base = self.expr()?;
                self.expect(b',')?;
                let exp = self.expr()?;
                self.expect(b')')?;
                Ok(Expr::Pow(Box::new(base), Box::new(exp)))
            }
            Some(c) if c.is_ascii_digit() => self.decimal(),
            Some(_) => Err(self.error("expected `n`, a number, `pow(` or `(`")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn decimal(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        let mut digits = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
        let mut scale = 0u32;
        if self.peek() == Some(b'.') {
            self.pos += 1;
            let frac_start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            if self.pos == frac_start {
                return Err(self.error("expected digits after decimal point"));
            }
            digits.push_str(&String::from_utf8_lossy(&self.src[frac_start..self.pos]));
            scale = (self.pos - frac_start) as u32;
        }
        self.skip_ws();
        let numer: BigInt = digits.parse().expect("digits only");
        let denom = num_traits::pow(BigInt::from(10), scale as usize);
        Ok(Expr::Literal(Rational::new(numer, denom)))
    }
}
