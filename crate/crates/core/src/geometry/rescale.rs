//! Transformation laws under `ĝ = Ω² g`, with `Υ = Ω⁻¹ dΩ`.

use nalgebra::{DMatrix, DVector};

use super::curvature::GeometryJet;
use super::metric::ConformalFactor;
use crate::error::{Error, Result};
use crate::state::CurveState;

/// `∇_a Υ_b` at the jet's point.
pub fn nabla_upsilon(jet: &GeometryJet, factor: &ConformalFactor) -> Result<DMatrix<f64>> {
    let (ups, dups) = factor.upsilon_with_partials(&jet.point)?;
    let n = jet.dim;
    Ok(DMatrix::from_fn(n, n, |a, b| {
        dups[(a, b)] - (0..n).map(|c| jet.christoffel.at([c, a, b]) * ups[c]).sum::<f64>()
    }))
}

/// Schouten tensor of `Ω² g` from that of `g`:
/// `P̂ = P − ∇Υ + Υ⊗Υ − ½|Υ|² g`.
pub fn rescaled_schouten(jet: &GeometryJet, factor: &ConformalFactor) -> Result<DMatrix<f64>> {
    let ups = factor.upsilon(&jet.point)?;
    let sharp = jet.raise(&ups);
    let norm2 = ups.dot(&sharp);
    Ok(&jet.schouten - nabla_upsilon(jet, factor)? + &ups * ups.transpose() - &jet.g * (0.5 * norm2))
}

/// Acceleration of the same parametrized curve with respect to the connection of
/// `Ω² g`: `Â = A − |U|² Υ♯ + 2 Υ(U) U`.
pub fn rescaled_acceleration(jet: &GeometryJet, factor: &ConformalFactor, state: &CurveState) -> Result<DVector<f64>> {
    let u2 = jet.norm2(&state.u);
    if u2 == 0.0 {
        return Err(Error::NullVelocity(u2));
    }
    let ups = factor.upsilon(&jet.point)?;
    let sharp = jet.raise(&ups);
    Ok(&state.a - sharp * u2 + &state.u * (2.0 * ups.dot(&state.u)))
}
