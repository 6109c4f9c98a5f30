//! Conversion between coordinate derivatives of a curve and iterated covariant
//! derivatives along it.
//!
//! A curve is described at one parameter value by `[x', x'', x''', ...]` and the
//! connection along it by the Taylor data of `Γ(x(t))`. Everything is carried as
//! derivatives in `t` and combined with the Leibniz rule.

use nalgebra::DVector;

use super::curvature::GeometryJet;
use super::tensor::Tensor;
use crate::error::{Error, Result};

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn contract(g: &Tensor, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let n = u.len();
    DVector::from_fn(n, |a, _| {
        let mut s = 0.0;
        for b in 0..n {
            for c in 0..n {
                s += g.at([a, b, c]) * u[b] * v[c];
            }
        }
        s
    })
}

/// `d^k/dt^k Γ(x(t))` for `k = 0..=order`, given coordinate velocity derivatives
/// `xd = [x', x'', ...]`. Order 2 needs the second connection partials.
pub fn christoffel_along(jet: &GeometryJet, xd: &[DVector<f64>], order: usize) -> Result<Vec<Tensor>> {
    let n = jet.dim;
    let mut out = vec![jet.christoffel.clone()];
    if order >= 1 {
        let mut t = Tensor::zeros(n, 3);
        for e in 0..n {
            if xd[0][e] == 0.0 {
                continue;
            }
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        t.add_at([a, b, c], jet.dchristoffel.at([e, a, b, c]) * xd[0][e]);
                    }
                }
            }
        }
        out.push(t);
    }
    if order >= 2 {
        let d2 = jet
            .d2christoffel
            .as_ref()
            .ok_or_else(|| Error::Config("second connection partials need JetLevel::Full".into()))?;
        let mut t = Tensor::zeros(n, 3);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut s = 0.0;
                    for e in 0..n {
                        s += jet.dchristoffel.at([e, a, b, c]) * xd[1][e];
                        for f in 0..n {
                            s += d2.at([f, e, a, b, c]) * xd[0][f] * xd[0][e];
                        }
                    }
                    t.set([a, b, c], s);
                }
            }
        }
        out.push(t);
    }
    if order >= 3 {
        return Err(Error::Config("connection derivatives beyond second order are not available".into()));
    }
    Ok(out)
}

/// `d^m/dt^m Γ(U, V)` from the Taylor data of each factor.
fn gamma_product(gs: &[Tensor], us: &[DVector<f64>], vs: &[DVector<f64>], m: usize) -> DVector<f64> {
    let n = us[0].len();
    let mut out = DVector::zeros(n);
    for i in 0..=m {
        for j in 0..=(m - i) {
            let k = m - i - j;
            let coef = binom(m, i) * binom(m - i, j);
            out += contract(&gs[i], &us[j], &vs[k]) * coef;
        }
    }
    out
}

/// Covariant derivatives `[V, ∇V, ∇²V, ...]` along the curve of a vector field with
/// coordinate derivatives `vd = [V, V', V'', ...]`. `us = [U, U', ...]` are the
/// coordinate derivatives of the velocity. Returns as many levels as the data allows.
pub fn covariant_derivatives(gs: &[Tensor], us: &[DVector<f64>], vd: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut levels = vec![vd.to_vec()];
    while levels.last().unwrap().len() > 1 {
        let cur = levels.last().unwrap();
        let depth = cur.len() - 1;
        if depth > gs.len() || depth > us.len() {
            break;
        }
        let next: Vec<DVector<f64>> = (0..depth)
            .map(|m| &cur[m + 1] + gamma_product(gs, us, cur, m))
            .collect();
        levels.push(next);
    }
    levels.into_iter().map(|l| l[0].clone()).collect()
}

/// From coordinate derivatives `[x', x'', ..., x^(k)]` (1 ≤ k ≤ 4) to `[U, A, J, S]`
/// truncated to `k` entries.
pub fn covariant_from_coordinates(jet: &GeometryJet, xd: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let k = xd.len();
    if k == 0 || k > 4 {
        return Err(Error::Config(format!("expected 1 to 4 coordinate derivatives, got {k}")));
    }
    let order = k.saturating_sub(2);
    let gs = christoffel_along(jet, xd, order)?;
    let mut out = covariant_derivatives(&gs, xd, xd);
    out.truncate(k);
    Ok(out)
}

/// Inverse of [`covariant_from_coordinates`].
pub fn coordinates_from_covariant(jet: &GeometryJet, cov: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let k = cov.len();
    if k == 0 || k > 4 {
        return Err(Error::Config(format!("expected 1 to 4 covariant derivatives, got {k}")));
    }
    let n = jet.dim;
    let mut xd = vec![cov[0].clone()];
    for m in 1..k {
        // the m-th covariant derivative depends on x^(m+1) with unit coefficient
        let mut trial = xd.clone();
        trial.push(DVector::zeros(n));
        let c = covariant_from_coordinates(jet, &trial)?;
        xd.push(&cov[m] - &c[m]);
    }
    Ok(xd)
}

/// Re-expresses covariant curve data computed with the connection of `from` in
/// terms of the connection of `to`. Both jets must be at the same point.
pub fn transfer(from: &GeometryJet, to: &GeometryJet, cov: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let xd = coordinates_from_covariant(from, cov)?;
    covariant_from_coordinates(to, &xd)
}
