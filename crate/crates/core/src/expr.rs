//! Tiny arithmetic expression language for user-supplied fields.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numeric literals,
//! the constants `pi` and `e`, the functions `exp log ln sin cos sqrt` and
//! `pow(a, b)`, and variables `x1..xn`, `p1..pn`. The Unicode operators
//! `− × ÷` are accepted as synonyms. Expressions evaluate at any
//! [`Scalar`], so parsed fields differentiate exactly through jets.

use std::fmt;

use crate::error::{Error, EvalError, EvalResult, Result};
use crate::numerics::{Formula, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Which variable names are in scope: `x1..x{positions}` map to indices
/// `0..positions`, `p1..p{momenta}` follow them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    pub positions: usize,
    pub momenta: usize,
}

impl VarLayout {
    pub fn positions(n: usize) -> Self {
        VarLayout {
            positions: n,
            momenta: 0,
        }
    }

    pub fn phase_space(n: usize) -> Self {
        VarLayout {
            positions: n,
            momenta: n,
        }
    }

    /// Only `p1..pn`, indexed from zero.
    pub fn momenta_only(n: usize) -> Self {
        VarLayout {
            positions: 0,
            momenta: n,
        }
    }

    pub fn dim(&self) -> usize {
        self.positions + self.momenta
    }

    fn resolve(&self, name: &str) -> Option<usize> {
        let (prefix, digits) = name.split_at(1);
        let k: usize = digits.parse().ok()?;
        if k == 0 {
            return None;
        }
        match prefix {
            "x" if k <= self.positions => Some(k - 1),
            "p" if k <= self.momenta => Some(self.positions + k - 1),
            _ => None,
        }
    }
}

impl Expr {
    pub fn parse(src: &str, layout: VarLayout) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            layout,
        };
        let e = p.expr()?;
        if let Some(t) = p.tokens.get(p.pos) {
            return Err(Error::Parse {
                offset: t.offset,
                message: format!("unexpected trailing `{}`", t.kind),
            });
        }
        Ok(e)
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> EvalResult<S> {
        Ok(match self {
            Expr::Num(v) => S::constant(*v),
            Expr::Var(i) => x
                .get(*i)
                .cloned()
                .ok_or(EvalError::DimensionMismatch {
                    expected: i + 1,
                    got: x.len(),
                })?,
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => a.eval(x)?.try_div(&b.eval(x)?)?,
            Expr::Pow(a, b) => a.eval(x)?.try_powf(&b.eval(x)?)?,
            Expr::Call(f, a) => {
                let v = a.eval(x)?;
                match f {
                    Func::Exp => v.exp(),
                    Func::Ln => v.try_ln()?,
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Sqrt => v.try_powf(&S::constant(0.5))?,
                }
            }
        })
    }
}

/// A vector of parsed expressions evaluated as one function.
#[derive(Debug, Clone)]
pub struct ExprFormula {
    dim_in: usize,
    exprs: Vec<Expr>,
    sources: Vec<String>,
}

impl ExprFormula {
    pub fn parse<T: AsRef<str>>(components: &[T], layout: VarLayout) -> Result<Self> {
        let exprs = components
            .iter()
            .map(|s| Expr::parse(s.as_ref(), layout))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExprFormula {
            dim_in: layout.dim(),
            exprs,
            sources: components.iter().map(|s| s.as_ref().to_string()).collect(),
        })
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }
}

impl Formula for ExprFormula {
    fn dim_in(&self) -> usize {
        self.dim_in
    }
    fn dim_out(&self) -> usize {
        self.exprs.len()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> EvalResult<Vec<S>> {
        self.exprs.iter().map(|e| e.eval(x)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Num(v) => write!(f, "{v}"),
            TokenKind::Ident(s) => write!(f, "{s}"),
            TokenKind::Plus => f.write_str("+"),
            TokenKind::Minus => f.write_str("-"),
            TokenKind::Star => f.write_str("*"),
            TokenKind::Slash => f.write_str("/"),
            TokenKind::Caret => f.write_str("^"),
            TokenKind::LParen => f.write_str("("),
            TokenKind::RParen => f.write_str(")"),
            TokenKind::Comma => f.write_str(","),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(offset, c)) = chars.peek() {
        let single = match c {
            c if c.is_whitespace() => {
                chars.next();
                continue;
            }
            '+' => Some(TokenKind::Plus),
            '-' | '−' => Some(TokenKind::Minus),
            '*' | '×' | '·' => Some(TokenKind::Star),
            '/' | '÷' => Some(TokenKind::Slash),
            '^' => Some(TokenKind::Caret),
            '(' => Some(TokenKind::LParen),
            ')' => Some(TokenKind::RParen),
            ',' => Some(TokenKind::Comma),
            _ => None,
        };
        if let Some(kind) = single {
            chars.next();
            out.push(Token { kind, offset });
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let mut end = offset;
            let mut prev = ' ';
            while let Some(&(i, d)) = chars.peek() {
                let exp_sign = (d == '+' || d == '-') && (prev == 'e' || prev == 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    end = i + d.len_utf8();
                    prev = d;
                    chars.next();
                } else {
                    break;
                }
            }
            let text = &src[offset..end];
            let v: f64 = text.parse().map_err(|_| Error::Parse {
                offset,
                message: format!("malformed number `{text}`"),
            })?;
            out.push(Token {
                kind: TokenKind::Num(v),
                offset,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut end = offset;
            while let Some(&(i, d)) = chars.peek() {
                if d.is_ascii_alphanumeric() || d == '_' {
                    end = i + d.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            out.push(Token {
                kind: TokenKind::Ident(src[offset..end].to_string()),
                offset,
            });
            continue;
        }
        return Err(Error::Parse {
            offset,
            message: format!("unexpected character `{c}`"),
        });
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    layout: VarLayout,
}

impl Parser {
    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map_or_else(|| self.tokens.last().map_or(0, |t| t.offset + 1), |t| t.offset)
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<()> {
        if self.eat(&kind) {
            Ok(())
        } else {
            Err(Error::Parse {
                offset: self.offset(),
                message: format!("expected `{kind}`"),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(&TokenKind::Plus) {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(&TokenKind::Minus) {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(&TokenKind::Star) {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(&TokenKind::Slash) {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(&TokenKind::Minus) {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(&TokenKind::Plus) {
            return self.unary();
        }
        self.power()
    }

    // right-associative; binds tighter than unary minus on its left
    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.eat(&TokenKind::Caret) {
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let offset = self.offset();
        let Some(kind) = self.peek().cloned() else {
            return Err(Error::Parse {
                offset,
                message: "unexpected end of expression".into(),
            });
        };
        self.pos += 1;
        match kind {
            TokenKind::Num(v) => Ok(Expr::Num(v)),
            TokenKind::LParen => {
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            TokenKind::Ident(name) => self.ident(name, offset),
            other => Err(Error::Parse {
                offset,
                message: format!("unexpected `{other}`"),
            }),
        }
    }

    fn ident(&mut self, name: String, offset: usize) -> Result<Expr> {
        if self.eat(&TokenKind::LParen) {
            let arg = self.expr()?;
            if name == "pow" {
                self.expect(TokenKind::Comma)?;
                let exponent = self.expr()?;
                self.expect(TokenKind::RParen)?;
                return Ok(Expr::Pow(Box::new(arg), Box::new(exponent)));
            }
            self.expect(TokenKind::RParen)?;
            let func = match name.as_str() {
                "exp" => Func::Exp,
                "log" | "ln" => Func::Ln,
                "sin" => Func::Sin,
                "cos" => Func::Cos,
                "sqrt" => Func::Sqrt,
                _ => {
                    return Err(Error::Parse {
                        offset,
                        message: format!("unknown function `{name}`"),
                    })
                }
            };
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        match name.as_str() {
            "pi" => Ok(Expr::Num(std::f64::consts::PI)),
            "e" => Ok(Expr::Num(std::f64::consts::E)),
            _ => self
                .layout
                .resolve(&name)
                .map(Expr::Var)
                .ok_or_else(|| Error::Parse {
                    offset,
                    message: format!("unknown variable `{name}`"),
                }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{jacobian, Jet, VectorFn};

    fn eval(src: &str, x: &[f64]) -> f64 {
        Expr::parse(src, VarLayout::positions(x.len()))
            .unwrap()
            .eval(x)
            .unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2 * 3", &[]), 7.0);
        assert_eq!(eval("2 ^ 3 ^ 2", &[]), 512.0);
        assert_eq!(eval("-x1^2", &[3.0]), -9.0);
        assert_eq!(eval("(1 + 2) * 3 - 4 / 2", &[]), 7.0);
        assert_eq!(eval("2 × 3 − 1 ÷ 4", &[]), 5.75);
        assert_eq!(eval("1.5e-1 * 2E1", &[]), 3.0);
        assert_eq!(eval("x1 - x2 - x3", &[1.0, 2.0, 3.0]), -4.0);
    }

    #[test]
    fn functions_and_constants() {
        assert!((eval("sin(pi/2) + cos(0) + exp(0) + log(e)", &[]) - 4.0).abs() < 1e-15);
        assert_eq!(eval("pow(x1, 3)", &[-2.0]), -8.0);
        assert_eq!(eval("sqrt(16)", &[]), 4.0);
    }

    #[test]
    fn momenta_follow_positions() {
        let e = Expr::parse("p1*x1 + p2", VarLayout::phase_space(2)).unwrap();
        assert_eq!(e.eval(&[2.0, 0.0, 3.0, 5.0]).unwrap(), 11.0);
        let h = Expr::parse("p1^2/2 + p1*p2", VarLayout::momenta_only(2)).unwrap();
        assert_eq!(h.eval(&[2.0, 1.0]).unwrap(), 4.0);
    }

    #[test]
    fn parse_errors_carry_offsets() {
        let bad = |s: &str| Expr::parse(s, VarLayout::positions(2)).unwrap_err();
        assert!(matches!(bad("x3"), Error::Parse { offset: 0, .. }));
        assert!(matches!(bad("1 +"), Error::Parse { .. }));
        assert!(matches!(bad("foo(1)"), Error::Parse { .. }));
        assert!(matches!(bad("(1"), Error::Parse { .. }));
        assert!(matches!(bad("1 2"), Error::Parse { offset: 2, .. }));
        assert!(matches!(bad("x1 $ 2"), Error::Parse { offset: 3, .. }));
        assert!(matches!(bad("x0"), Error::Parse { .. }));
    }

    #[test]
    fn jets_through_parsed_formula() {
        let f = ExprFormula::parse(&["2*x1", "x1 + 2*x2"], VarLayout::positions(2)).unwrap();
        let j = jacobian(&f, &[0.3, 0.7]).unwrap();
        assert_eq!(j.row(0), &[2.0, 0.0]);
        assert_eq!(j.row(1), &[1.0, 2.0]);
        let x = Jet::seed(&[1.0, 1.0]);
        let out = f.eval_jet(&x).unwrap();
        assert_eq!(out[1].value, 3.0);
    }

    #[test]
    fn domain_errors() {
        let e = Expr::parse("1/x1", VarLayout::positions(1)).unwrap();
        assert_eq!(e.eval(&[0.0]), Err(EvalError::DivisionByZero));
        let e = Expr::parse("log(x1)", VarLayout::positions(1)).unwrap();
        assert!(matches!(e.eval(&[-1.0]), Err(EvalError::LogDomain(_))));
    }
}
