//! Truncated Taylor series in one variable, used to differentiate closed-form
//! curves exactly up to fourth order.

use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::DVector;

use crate::jet::{elementary, Scalar};

pub const DEGREE: usize = 4;
const N: usize = DEGREE + 1;
const FACT: [f64; N] = [1.0, 1.0, 2.0, 6.0, 24.0];

/// `c[k]` is the k-th Taylor coefficient about the expansion point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Series {
    pub c: [f64; N],
}

impl Series {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = v;
        Series { c }
    }

    /// The independent variable expanded about `t`.
    pub fn variable(t: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = t;
        c[1] = 1.0;
        Series { c }
    }

    /// k-th derivative at the expansion point.
    pub fn deriv(&self, k: usize) -> f64 {
        self.c[k] * FACT[k]
    }

    pub fn exp(self) -> Self {
        self.compose(elementary::exp(self.c[0]))
    }
    pub fn sin(self) -> Self {
        self.compose(elementary::sin(self.c[0]))
    }
    pub fn cos(self) -> Self {
        self.compose(elementary::cos(self.c[0]))
    }
    pub fn sqrt(self) -> Self {
        self.compose(elementary::sqrt(self.c[0]))
    }
    pub fn recip(self) -> Self {
        Series::constant(1.0) / self
    }
}

impl Add for Series {
    type Output = Series;
    fn add(mut self, o: Series) -> Series {
        for k in 0..N {
            self.c[k] += o.c[k];
        }
        self
    }
}

impl Sub for Series {
    type Output = Series;
    fn sub(mut self, o: Series) -> Series {
        for k in 0..N {
            self.c[k] -= o.c[k];
        }
        self
    }
}

impl Neg for Series {
    type Output = Series;
    fn neg(mut self) -> Series {
        for v in self.c.iter_mut() {
            *v = -*v;
        }
        self
    }
}

impl Mul for Series {
    type Output = Series;
    fn mul(self, o: Series) -> Series {
        let mut c = [0.0; N];
        for i in 0..N {
            for j in 0..N - i {
                c[i + j] += self.c[i] * o.c[j];
            }
        }
        Series { c }
    }
}

impl Div for Series {
    type Output = Series;
    fn div(self, o: Series) -> Series {
        let mut q = [0.0; N];
        for k in 0..N {
            let mut s = self.c[k];
            for j in 1..=k {
                s -= o.c[j] * q[k - j];
            }
            q[k] = s / o.c[0];
        }
        Series { c: q }
    }
}

impl Mul<f64> for Series {
    type Output = Series;
    fn mul(mut self, s: f64) -> Series {
        for v in self.c.iter_mut() {
            *v *= s;
        }
        self
    }
}

impl Add<f64> for Series {
    type Output = Series;
    fn add(mut self, s: f64) -> Series {
        self.c[0] += s;
        self
    }
}

impl Scalar for Series {
    fn lift(&self, c: f64) -> Self {
        Series::constant(c)
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
    fn compose(&self, d: [f64; 5]) -> Self {
        let mut delta = *self;
        delta.c[0] = 0.0;
        let mut out = Series::constant(d[0]);
        let mut pow = Series::constant(1.0);
        for (k, dk) in d.iter().enumerate().skip(1) {
            pow = pow * delta;
            out = out + pow * (dk / FACT[k]);
        }
        out
    }
}

/// A point-valued series: one series per coordinate.
pub type SeriesPoint = Vec<Series>;

pub fn dot(a: &[Series], b: &[Series]) -> Series {
    a.iter().zip(b).fold(Series::constant(0.0), |acc, (x, y)| acc + *x * *y)
}

/// Coordinate derivatives `[x, x', x'', x''', x'''']` of a point-valued series.
pub fn derivatives(p: &[Series]) -> Vec<DVector<f64>> {
    (0..N).map(|k| DVector::from_iterator(p.len(), p.iter().map(|s| s.deriv(k)))).collect()
}

pub fn constant_point(x: &[f64]) -> SeriesPoint {
    x.iter().map(|v| Series::constant(*v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_sin_derivatives() {
        let t = Series::variable(0.3);
        let f = t.exp() * (t * 2.0).sin();
        // d^k/dt^k e^t sin 2t = 5^{k/2} e^t sin(2t + kφ), φ = atan 2
        let phi = 2f64.atan();
        for k in 0..=DEGREE {
            let exact = 5f64.powf(k as f64 / 2.0) * 0.3f64.exp() * (0.6 + k as f64 * phi).sin();
            assert!((f.deriv(k) - exact).abs() < 1e-12, "{k}");
        }
    }

    #[test]
    fn division_inverts_multiplication() {
        let t = Series::variable(0.7);
        let a = t * t + 1.0;
        let b = t.cos() + 2.0;
        let q = (a * b) / b;
        for k in 0..N {
            assert!((q.c[k] - a.c[k]).abs() < 1e-14);
        }
        let r = Series::constant(1.0) / (t + 1.0);
        // 1/(1.7 + δ) coefficients (−1)^k / 1.7^{k+1}
        for k in 0..N {
            assert!((r.c[k] - (-1f64).powi(k as i32) / 1.7f64.powi(k as i32 + 1)).abs() < 1e-14);
        }
    }
}
