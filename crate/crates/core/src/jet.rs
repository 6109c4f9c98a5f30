//! Forward-mode multivariate jets carrying a value and all partial
//! derivatives up to third order.
//!
//! Metric components are written once as expressions and evaluated on
//! [`Jet`] values, which yields exact first, second and third partials of
//! `g_ab` without finite differencing. Third-order storage is optional so
//! that connection/curvature-only evaluations stay cheap.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar types an expression can be evaluated on.
pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// A constant with the same shape (variable count, order) as `self`.
    fn lift(&self, c: f64) -> Self;
    fn value(&self) -> f64;
    /// Applies a univariate function given its derivatives `[f, f', f'', f''', f'''']`
    /// at `self.value()`.
    fn compose(&self, d: [f64; 5]) -> Self;

    fn scale(&self, c: f64) -> Self {
        self.clone() * self.lift(c)
    }
}

impl Scalar for f64 {
    fn lift(&self, c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn compose(&self, d: [f64; 5]) -> Self {
        d[0]
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    n: usize,
    v: f64,
    g: Vec<f64>,
    h: Vec<f64>,
    /// Empty when the jet only tracks up to second order.
    t: Vec<f64>,
}

impl Jet {
    pub fn constant(n: usize, third: bool, c: f64) -> Self {
        Jet {
            n,
            v: c,
            g: vec![0.0; n],
            h: vec![0.0; n * n],
            t: if third { vec![0.0; n * n * n] } else { Vec::new() },
        }
    }

    /// The coordinate function `x^i` evaluated at `x`.
    pub fn variable(x: &[f64], i: usize, third: bool) -> Self {
        let mut j = Jet::constant(x.len(), third, x[i]);
        j.g[i] = 1.0;
        j
    }

    /// All coordinate functions at `x`.
    pub fn variables(x: &[f64], third: bool) -> Vec<Jet> {
        (0..x.len()).map(|i| Jet::variable(x, i, third)).collect()
    }

    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn has_third(&self) -> bool {
        !self.t.is_empty()
    }
    pub fn grad(&self, i: usize) -> f64 {
        self.g[i]
    }
    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.h[i * self.n + j]
    }
    /// Third partial; zero when third order is not tracked.
    pub fn third(&self, i: usize, j: usize, k: usize) -> f64 {
        if self.t.is_empty() {
            0.0
        } else {
            self.t[(i * self.n + j) * self.n + k]
        }
    }

    fn zip(&self, o: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        debug_assert_eq!(self.n, o.n);
        let third = self.has_third() && o.has_third();
        Jet {
            n: self.n,
            v: f(self.v, o.v),
            g: self.g.iter().zip(&o.g).map(|(a, b)| f(*a, *b)).collect(),
            h: self.h.iter().zip(&o.h).map(|(a, b)| f(*a, *b)).collect(),
            t: if third {
                self.t.iter().zip(&o.t).map(|(a, b)| f(*a, *b)).collect()
            } else {
                Vec::new()
            },
        }
    }

    fn product(&self, o: &Jet) -> Jet {
        let n = self.n;
        let third = self.has_third() && o.has_third();
        let (f, g) = (self, o);
        let mut out = Jet::constant(n, third, f.v * g.v);
        for i in 0..n {
            out.g[i] = f.g[i] * g.v + f.v * g.g[i];
        }
        for i in 0..n {
            for j in 0..n {
                out.h[i * n + j] = f.hess(i, j) * g.v
                    + f.g[i] * g.g[j]
                    + f.g[j] * g.g[i]
                    + f.v * g.hess(i, j);
            }
        }
        if third {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        out.t[(i * n + j) * n + k] = f.third(i, j, k) * g.v
                            + f.hess(i, j) * g.g[k]
                            + f.hess(i, k) * g.g[j]
                            + f.hess(j, k) * g.g[i]
                            + f.g[i] * g.hess(j, k)
                            + f.g[j] * g.hess(i, k)
                            + f.g[k] * g.hess(i, j)
                            + f.v * g.third(i, j, k);
                    }
                }
            }
        }
        out
    }

    fn chain(&self, d: [f64; 5]) -> Jet {
        let n = self.n;
        let f = self;
        let mut out = Jet::constant(n, f.has_third(), d[0]);
        for i in 0..n {
            out.g[i] = d[1] * f.g[i];
        }
        for i in 0..n {
            for j in 0..n {
                out.h[i * n + j] = d[2] * f.g[i] * f.g[j] + d[1] * f.hess(i, j);
            }
        }
        if f.has_third() {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        out.t[(i * n + j) * n + k] = d[3] * f.g[i] * f.g[j] * f.g[k]
                            + d[2]
                                * (f.hess(i, j) * f.g[k]
                                    + f.hess(i, k) * f.g[j]
                                    + f.hess(j, k) * f.g[i])
                            + d[1] * f.third(i, j, k);
                    }
                }
            }
        }
        out
    }

    fn reciprocal(&self) -> Jet {
        let x = self.v;
        self.chain([
            1.0 / x,
            -1.0 / (x * x),
            2.0 / (x * x * x),
            -6.0 / (x * x * x * x),
            24.0 / (x * x * x * x * x),
        ])
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        self.zip(&o, |a, b| a + b)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self.zip(&o, |a, b| a - b)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        self.product(&o)
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self.product(&o.reciprocal())
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Scalar for Jet {
    fn lift(&self, c: f64) -> Self {
        Jet::constant(self.n, self.has_third(), c)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn compose(&self, d: [f64; 5]) -> Self {
        self.chain(d)
    }
    fn scale(&self, c: f64) -> Self {
        Jet {
            n: self.n,
            v: self.v * c,
            g: self.g.iter().map(|a| a * c).collect(),
            h: self.h.iter().map(|a| a * c).collect(),
            t: self.t.iter().map(|a| a * c).collect(),
        }
    }
}

/// Derivatives `[f, f', f'', f''', f'''']` of the elementary functions.
pub mod elementary {
    pub fn exp(x: f64) -> [f64; 5] {
        let e = x.exp();
        [e; 5]
    }
    pub fn ln(x: f64) -> [f64; 5] {
        [
            x.ln(),
            1.0 / x,
            -1.0 / (x * x),
            2.0 / x.powi(3),
            -6.0 / x.powi(4),
        ]
    }
    pub fn sin(x: f64) -> [f64; 5] {
        let (s, c) = x.sin_cos();
        [s, c, -s, -c, s]
    }
    pub fn cos(x: f64) -> [f64; 5] {
        let (s, c) = x.sin_cos();
        [c, -s, -c, s, c]
    }
    pub fn sinh(x: f64) -> [f64; 5] {
        let (s, c) = (x.sinh(), x.cosh());
        [s, c, s, c, s]
    }
    pub fn cosh(x: f64) -> [f64; 5] {
        let (s, c) = (x.sinh(), x.cosh());
        [c, s, c, s, c]
    }
    pub fn tan(x: f64) -> [f64; 5] {
        let t = x.tan();
        let s = 1.0 + t * t;
        [
            t,
            s,
            2.0 * t * s,
            2.0 * s * (1.0 + 3.0 * t * t),
            8.0 * t * s * (2.0 + 3.0 * t * t),
        ]
    }
    pub fn tanh(x: f64) -> [f64; 5] {
        let t = x.tanh();
        let s = 1.0 - t * t;
        [
            t,
            s,
            -2.0 * t * s,
            -2.0 * s * (1.0 - 3.0 * t * t),
            8.0 * t * s * (2.0 - 3.0 * t * t),
        ]
    }
    /// x^p for real p.
    pub fn powf(x: f64, p: f64) -> [f64; 5] {
        [
            x.powf(p),
            p * x.powf(p - 1.0),
            p * (p - 1.0) * x.powf(p - 2.0),
            p * (p - 1.0) * (p - 2.0) * x.powf(p - 3.0),
            p * (p - 1.0) * (p - 2.0) * (p - 3.0) * x.powf(p - 4.0),
        ]
    }
    /// x^k for integer k, exact at x = 0 for k >= 0.
    pub fn powi(x: f64, k: i32) -> [f64; 5] {
        let mut d = [0.0; 5];
        for (m, slot) in d.iter_mut().enumerate() {
            let mut coeff = 1.0;
            for q in 0..m as i32 {
                coeff *= (k - q) as f64;
            }
            *slot = if coeff == 0.0 { 0.0 } else { coeff * x.powi(k - m as i32) };
        }
        d
    }
    pub fn sqrt(x: f64) -> [f64; 5] {
        powf(x, 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f<S: Scalar>(x: &[S]) -> S {
        // x0^2 * sin(x1) / (1 + x2^2)
        let one = x[0].lift(1.0);
        let num = x[0].clone() * x[0].clone() * x[1].compose(elementary::sin(x[1].value()));
        let den = one + x[2].clone() * x[2].clone();
        num / den
    }

    fn fd_grad(x: &[f64], i: usize, h: f64) -> f64 {
        let mut p = x.to_vec();
        let mut m = x.to_vec();
        p[i] += h;
        m[i] -= h;
        (f(&p) - f(&m)) / (2.0 * h)
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let x = [0.7, -0.3, 0.4];
        let j = f(&Jet::variables(&x, true));
        assert!((j.value() - f(&x)).abs() < 1e-15);
        for i in 0..3 {
            assert!((j.grad(i) - fd_grad(&x, i, 1e-6)).abs() < 1e-8);
        }
    }

    #[test]
    fn hessian_and_third_are_symmetric_and_consistent() {
        let x = [0.7, -0.3, 0.4];
        let h = 1e-4;
        let j = f(&Jet::variables(&x, true));
        for a in 0..3 {
            for b in 0..3 {
                assert!((j.hess(a, b) - j.hess(b, a)).abs() < 1e-14);
                let mut p = x;
                let mut m = x;
                p[b] += h;
                m[b] -= h;
                let jp = f(&Jet::variables(&p, false));
                let jm = f(&Jet::variables(&m, false));
                assert!((j.hess(a, b) - (jp.grad(a) - jm.grad(a)) / (2.0 * h)).abs() < 1e-7);
                for c in 0..3 {
                    assert!((j.third(a, b, c) - j.third(c, a, b)).abs() < 1e-13);
                    let fd = (jp.hess(a, c) - jm.hess(a, c)) / (2.0 * h);
                    assert!((j.third(a, c, b) - fd).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn powi_handles_zero_base() {
        let d = elementary::powi(0.0, 2);
        assert_eq!(d, [0.0, 0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn second_order_jets_drop_third() {
        let x = [0.2, 0.1];
        let j = Jet::variable(&x, 0, false) * Jet::variable(&x, 1, false);
        assert!(!j.has_third());
        assert_eq!(j.third(0, 0, 1), 0.0);
        assert_eq!(j.hess(0, 1), 1.0);
    }
}
