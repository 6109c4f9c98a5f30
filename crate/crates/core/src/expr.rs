//! Scalar field expressions in the coordinates `x1..xn`.
//!
//! Grammar (usual precedence, `^` right-associative):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'pi' | 'x' index | 'r2' | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `r2` is shorthand for `x1^2 + ... + xn^2`. Functions: exp, ln, log, sin,
//! cos, tan, sinh, cosh, tanh, sqrt.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::jet::{elementary, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Sqrt,
}

impl Func {
    fn parse(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn derivs(self, x: f64) -> [f64; 5] {
        match self {
            Func::Exp => elementary::exp(x),
            Func::Ln => elementary::ln(x),
            Func::Sin => elementary::sin(x),
            Func::Cos => elementary::cos(x),
            Func::Tan => elementary::tan(x),
            Func::Sinh => elementary::sinh(x),
            Func::Cosh => elementary::cosh(x),
            Func::Tanh => elementary::tanh(x),
            Func::Sqrt => elementary::sqrt(x),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Const(f64),
    Var(usize),
    R2,
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Neg(Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed scalar expression, keeping its source text for serialization.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
    max_var: Option<usize>,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { s: src.as_bytes(), pos: 0 };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(Error::Expr(format!(
                "unexpected trailing input at {} in {src:?}",
                p.pos
            )));
        }
        let max_var = max_var(&root);
        Ok(Expr { source: src.trim().to_string(), root, max_var })
    }

    pub fn constant(c: f64) -> Expr {
        Expr { source: format!("{c:?}"), root: Node::Const(c), max_var: None }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Highest variable index used (0-based), if any.
    pub fn max_var(&self) -> Option<usize> {
        self.max_var
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> Result<S> {
        if let Some(m) = self.max_var {
            if m >= x.len() {
                return Err(Error::Expr(format!(
                    "{:?} uses x{} but the point has dimension {}",
                    self.source,
                    m + 1,
                    x.len()
                )));
            }
        }
        Ok(eval(&self.root, x))
    }

    pub fn eval_f64(&self, x: &[f64]) -> Result<f64> {
        self.eval(x)
    }
}

fn max_var(n: &Node) -> Option<usize> {
    match n {
        Node::Const(_) | Node::R2 => None,
        Node::Var(i) => Some(*i),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            max_var(a).max(max_var(b))
        }
        Node::Neg(a) | Node::Call(_, a) => max_var(a),
    }
}

fn eval<S: Scalar>(n: &Node, x: &[S]) -> S {
    match n {
        Node::Const(c) => x[0].lift(*c),
        Node::Var(i) => x[*i].clone(),
        Node::R2 => x
            .iter()
            .fold(x[0].lift(0.0), |acc, xi| acc + xi.clone() * xi.clone()),
        Node::Add(a, b) => eval(a, x) + eval(b, x),
        Node::Sub(a, b) => eval(a, x) - eval(b, x),
        Node::Mul(a, b) => eval(a, x) * eval(b, x),
        Node::Div(a, b) => eval(a, x) / eval(b, x),
        Node::Neg(a) => -eval(a, x),
        Node::Pow(a, b) => {
            let base = eval(a, x);
            match **b {
                Node::Const(p) if p.fract() == 0.0 && p.abs() < 64.0 => {
                    let v = base.value();
                    base.compose(elementary::powi(v, p as i32))
                }
                Node::Const(p) => {
                    let v = base.value();
                    base.compose(elementary::powf(v, p))
                }
                _ => {
                    let e = eval(b, x);
                    let lb = base.compose(elementary::ln(base.value()));
                    let prod = e * lb;
                    let v = prod.value();
                    prod.compose(elementary::exp(v))
                }
            }
        }
        Node::Call(f, a) => {
            let arg = eval(a, x);
            let v = arg.value();
            arg.compose(f.derivs(v))
        }
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn err<T>(&self, msg: &str) -> Result<T> {
        Err(Error::Expr(format!(
            "{msg} at position {} in {:?}",
            self.pos,
            String::from_utf8_lossy(self.s)
        )))
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(match self.unary()? {
                Node::Const(c) => Node::Const(-c),
                inner => Node::Neg(Box::new(inner)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(match (&base, &exp) {
                (Node::Const(b), Node::Const(e)) if e.fract() == 0.0 && e.abs() < 64.0 => Node::Const(b.powi(*e as i32)),
                (Node::Const(b), Node::Const(e)) => Node::Const(b.powf(*e)),
                _ => Node::Pow(Box::new(base), Box::new(exp)),
            });
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
                if word == "pi" {
                    return Ok(Node::Const(std::f64::consts::PI));
                }
                if word == "r2" {
                    return Ok(Node::R2);
                }
                if let Some(idx) = word.strip_prefix('x') {
                    if let Ok(i) = idx.parse::<usize>() {
                        if i == 0 {
                            return self.err("variables are numbered from x1");
                        }
                        return Ok(Node::Var(i - 1));
                    }
                }
                if let Some(f) = Func::parse(word) {
                    if self.peek() != Some(b'(') {
                        return self.err("expected '(' after function name");
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    if self.peek() != Some(b')') {
                        return self.err("expected ')'");
                    }
                    self.pos += 1;
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                self.err(&format!("unknown identifier {word:?}"))
            }
            _ => self.err("expected a value"),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.s.len()
            && (self.s[self.pos].is_ascii_digit() || self.s[self.pos] == b'.')
        {
            self.pos += 1;
        }
        if self.pos < self.s.len() && (self.s[self.pos] == b'e' || self.s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.s.len() && (self.s[self.pos] == b'+' || self.s[self.pos] == b'-') {
                self.pos += 1;
            }
            if self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
        text.parse::<f64>()
            .map(Node::Const)
            .or_else(|_| self.err("malformed number"))
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Expr::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Jet;

    #[test]
    fn parses_and_evaluates() {
        let e = Expr::parse("2/(1+r2)").unwrap();
        assert_eq!(e.eval_f64(&[0.0, 0.0, 0.0]).unwrap(), 2.0);
        assert!((e.eval_f64(&[1.0, 1.0, 0.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);

        let e = Expr::parse("-x1^2 + 3*exp(0.5*x2) - sin(pi*x3)/2").unwrap();
        let x = [0.3, -0.2, 0.1];
        let expect = -0.09 + 3.0 * (-0.1f64).exp() - (std::f64::consts::PI * 0.1).sin() / 2.0;
        assert!((e.eval_f64(&x).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn power_is_right_associative_and_binds_tighter_than_unary_minus() {
        let e = Expr::parse("-2^3^2").unwrap();
        assert_eq!(e.eval_f64(&[0.0]).unwrap(), -512.0);
    }

    #[test]
    fn scientific_notation() {
        let e = Expr::parse("1.5e-3*x1 + 2E2").unwrap();
        assert!((e.eval_f64(&[2.0]).unwrap() - 200.003).abs() < 1e-12);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("1 + ").is_err());
        assert!(Expr::parse("foo(x1)").is_err());
        assert!(Expr::parse("x0").is_err());
        assert!(Expr::parse("(x1").is_err());
        assert!(Expr::parse("x1 x2").is_err());
    }

    #[test]
    fn out_of_range_variable_is_an_error() {
        let e = Expr::parse("x4").unwrap();
        assert!(e.eval_f64(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn jet_evaluation_gives_exact_derivatives() {
        let e = Expr::parse("x1^2*x2 + sqrt(1+x3^2)").unwrap();
        let x = [0.5, 2.0, 1.0];
        let j: Jet = e.eval(&Jet::variables(&x, true)).unwrap();
        assert!((j.grad(0) - 2.0).abs() < 1e-14);
        assert!((j.grad(1) - 0.25).abs() < 1e-14);
        assert!((j.grad(2) - 1.0 / 2f64.sqrt()).abs() < 1e-14);
        assert!((j.hess(0, 1) - 1.0).abs() < 1e-14);
        assert!((j.third(0, 0, 1) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn serde_roundtrip_keeps_source() {
        let e = Expr::parse("exp(x1)").unwrap();
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, "\"exp(x1)\"");
        let back: Expr = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
    }
}
