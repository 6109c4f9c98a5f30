//! Conformal Killing–Yano pairs `(Y, W)` and the first integral `Q = Y(A,U) + W(U)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{GeometryJet, Tensor};
use crate::jet::{Jet, Scalar};

/// A 2-form `Y_bc` and 1-form `W_c` given by component expressions in `x1..xn`.
#[derive(Clone, Debug, PartialEq)]
pub struct CkyPair {
    dim: usize,
    /// Row-major `Y_bc`.
    y: Vec<Expr>,
    w: Vec<Expr>,
}

fn number(c: f64) -> String {
    format!("({c:?})")
}

impl CkyPair {
    pub fn new(dim: usize, y: Vec<Expr>, w: Vec<Expr>) -> Result<Self> {
        if y.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: y.len() });
        }
        if w.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: w.len() });
        }
        if let Some(m) = y.iter().chain(&w).filter_map(Expr::max_var).max() {
            if m >= dim {
                return Err(Error::Expr(format!("x{} used in a {dim}-dimensional pair", m + 1)));
            }
        }
        Ok(CkyPair { dim, y, w })
    }

    /// Builds `Y` from its strict upper triangle `(b, c, expr)` entries.
    pub fn from_upper(dim: usize, entries: &[(usize, usize, &str)], w: &[&str]) -> Result<Self> {
        let mut y = vec![Expr::constant(0.0); dim * dim];
        for &(b, c, src) in entries {
            if b >= c || c >= dim {
                return Err(Error::BadParams(format!("entry ({b}, {c}) is not in the strict upper triangle")));
            }
            y[b * dim + c] = Expr::parse(src)?;
            y[c * dim + b] = Expr::parse(&format!("-({src})"))?;
        }
        let w = w.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>>>()?;
        Self::new(dim, y, w)
    }

    pub fn constant(y: &DMatrix<f64>) -> Result<Self> {
        let n = y.nrows();
        let ys = y.iter().map(|c| Expr::constant(*c)).collect::<Vec<_>>();
        // nalgebra iterates column-major; transpose into row-major storage.
        let mut row_major = ys.clone();
        for b in 0..n {
            for c in 0..n {
                row_major[b * n + c] = ys[c * n + b].clone();
            }
        }
        Self::new(n, row_major, vec![Expr::constant(0.0); n])
    }

    /// `Y = x♭ ∧ k`, `W = k` for flat space: a CKY pair for any constant `k`.
    pub fn position_wedge(k: &[f64]) -> Result<Self> {
        let n = k.len();
        let mut entries = Vec::new();
        for b in 0..n {
            for c in b + 1..n {
                entries.push((b, c, format!("x{}*{} - x{}*{}", b + 1, number(k[c]), c + 1, number(k[b]))));
            }
        }
        let w: Vec<String> = k.iter().map(|c| number(*c)).collect();
        let refs: Vec<(usize, usize, &str)> = entries.iter().map(|(b, c, s)| (*b, *c, s.as_str())).collect();
        Self::from_upper(n, &refs, &w.iter().map(String::as_str).collect::<Vec<_>>())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Values and first partials: `(Y, [a] ∂_a Y, W, [a][c] ∂_a W_c)`.
    fn eval(&self, x: &[f64]) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>, DVector<f64>, DMatrix<f64>)> {
        let n = self.dim;
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        let vars = Jet::variables(x, false);
        let ys = self.y.iter().map(|e| e.eval(&vars)).collect::<Result<Vec<Jet>>>()?;
        let ws = self.w.iter().map(|e| e.eval(&vars)).collect::<Result<Vec<Jet>>>()?;
        let y = DMatrix::from_fn(n, n, |b, c| ys[b * n + c].value());
        let dy = (0..n).map(|a| DMatrix::from_fn(n, n, |b, c| ys[b * n + c].grad(a))).collect();
        let w = DVector::from_fn(n, |c, _| ws[c].value());
        let dw = DMatrix::from_fn(n, n, |a, c| ws[c].grad(a));
        Ok((y, dy, w, dw))
    }

    pub fn y_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.eval(x)?.0)
    }

    pub fn w_at(&self, x: &[f64]) -> Result<DVector<f64>> {
        Ok(self.eval(x)?.2)
    }
}

#[derive(Clone, Debug)]
pub struct CkyResidual {
    /// `[a][b][c] = ∇_a Y_bc − ∇_[a Y_bc] − 2 g_a[b W_c]`
    pub residual: Tensor,
    /// `max |Y_(bc)|`
    pub symmetric_part: f64,
    /// `max |∇_(b W_c)|`
    pub killing: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CkyResidualSummary {
    pub residual: f64,
    pub symmetric_part: f64,
    pub killing: f64,
}

impl CkyResidual {
    pub fn max_abs(&self) -> f64 {
        self.residual.max_abs().max(self.symmetric_part).max(self.killing)
    }

    pub fn summary(&self) -> CkyResidualSummary {
        CkyResidualSummary { residual: self.residual.max_abs(), symmetric_part: self.symmetric_part, killing: self.killing }
    }
}

pub fn cky_residual(jet: &GeometryJet, pair: &CkyPair, x: &[f64]) -> Result<CkyResidual> {
    let n = pair.dim;
    if jet.dim != n {
        return Err(Error::DimensionMismatch { expected: jet.dim, got: n });
    }
    let (y, dy, w, dw) = pair.eval(x)?;
    let gam = |d: usize, a: usize, b: usize| jet.christoffel.at([d, a, b]);
    let mut nabla_y = Tensor::zeros(n, 3);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut v = dy[a][(b, c)];
                for d in 0..n {
                    v -= gam(d, a, b) * y[(d, c)] + gam(d, a, c) * y[(b, d)];
                }
                nabla_y.set([a, b, c], v);
            }
        }
    }
    let mut residual = Tensor::zeros(n, 3);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let skew = (nabla_y.at([a, b, c]) + nabla_y.at([b, c, a]) + nabla_y.at([c, a, b])
                    - nabla_y.at([a, c, b])
                    - nabla_y.at([c, b, a])
                    - nabla_y.at([b, a, c]))
                    / 6.0;
                let gw = jet.g[(a, b)] * w[c] - jet.g[(a, c)] * w[b];
                residual.set([a, b, c], nabla_y.at([a, b, c]) - skew - gw);
            }
        }
    }
    let symmetric_part = (&y + y.transpose()).amax() / 2.0;
    let mut killing = 0.0f64;
    for b in 0..n {
        for c in 0..n {
            let mut v = dw[(b, c)] + dw[(c, b)];
            for d in 0..n {
                v -= 2.0 * gam(d, b, c) * w[d];
            }
            killing = killing.max(v.abs() / 2.0);
        }
    }
    Ok(CkyResidual { residual, symmetric_part, killing })
}

/// `Q = Y_bc A^b U^c + W_c U^c`
pub fn first_integral_q(pair: &CkyPair, x: &[f64], u: &DVector<f64>, a: &DVector<f64>) -> Result<f64> {
    let (y, _, w, _) = pair.eval(x)?;
    Ok(a.dot(&(&y * u)) + w.dot(u))
}

/// `X_H(Q)` for the flat vector field `U ∂_x + A ∂_U − |A|²U ∂_A`.
pub fn q_bracket_h(pair: &CkyPair, x: &[f64], u: &DVector<f64>, a: &DVector<f64>) -> Result<f64> {
    let (y, dy, w, dw) = pair.eval(x)?;
    let n = pair.dim;
    let mut transport = 0.0;
    for k in 0..n {
        transport += u[k] * (a.dot(&(&dy[k] * u)) + dw.row(k).transpose().dot(u));
    }
    let a_dot = -u * a.norm_squared();
    Ok(transport + a_dot.dot(&(&y * u)) + a.dot(&(&y * a)) + w.dot(a))
}

/// The expansion `(∂_a Y_bc + 2g_a[c W_b]) U^a U^c A^b + U^a U^b ∂_a W_b + Y_bc (A^b A^c − |A|² U^b U^c)`.
pub fn q_bracket_expansion(pair: &CkyPair, x: &[f64], u: &DVector<f64>, a: &DVector<f64>) -> Result<f64> {
    let (y, dy, w, dw) = pair.eval(x)?;
    let n = pair.dim;
    let mut first = 0.0;
    for k in 0..n {
        for b in 0..n {
            for c in 0..n {
                let g_ac = if k == c { 1.0 } else { 0.0 };
                let g_ab = if k == b { 1.0 } else { 0.0 };
                first += (dy[k][(b, c)] + g_ac * w[b] - g_ab * w[c]) * u[k] * u[c] * a[b];
            }
        }
    }
    let killing = u.dot(&(&dw * u));
    let quad = a.dot(&(&y * a)) - a.norm_squared() * u.dot(&(&y * u));
    Ok(first + killing + quad)
}
