//! Canonical form of the flat fourth-order flow with momenta `P` (for `x`) and
//! `R` (for `U`).

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::integrate::{integrate, Flow, Settings};
use crate::state::CurveState;
use crate::trajectory::{Metadata, Trajectory};

#[derive(Clone, Debug, PartialEq)]
pub struct OstrogradskyState {
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    /// Momentum conjugate to `x`.
    pub p: DVector<f64>,
    /// Momentum conjugate to `U`.
    pub r: DVector<f64>,
}

impl OstrogradskyState {
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Layout `x, U, R, P`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.x.iter().chain(self.u.iter()).chain(self.r.iter()).chain(self.p.iter()).copied().collect()
    }

    pub fn from_flat(n: usize, v: &[f64]) -> Result<Self> {
        if v.len() != 4 * n {
            return Err(Error::DimensionMismatch { expected: 4 * n, got: v.len() });
        }
        let block = |k: usize| DVector::from_column_slice(&v[k * n..(k + 1) * n]);
        Ok(OstrogradskyState { x: block(0), u: block(1), r: block(2), p: block(3) })
    }

    /// Momenta of a flat 3-jet `(x, U, A, J)`.
    pub fn from_curve(s: &CurveState) -> Result<Self> {
        let (u, a) = (&s.u, &s.a);
        let j = s.jerk()?;
        let u2 = nonnull(u)?;
        let ua = u.dot(a);
        let r = a / u2 - u * (2.0 * ua / (u2 * u2));
        let r_dot = j / u2 - a * (4.0 * ua / (u2 * u2)) - u * (2.0 * (a.norm_squared() + u.dot(j)) / (u2 * u2))
            + u * (8.0 * ua * ua / (u2 * u2 * u2));
        let ur = u.dot(&r);
        let p = -r_dot - u * r.norm_squared() + &r * (2.0 * ur);
        Ok(OstrogradskyState { x: s.x.clone(), u: u.clone(), p, r })
    }

    /// The 3-jet `(x, U, A, J)` of the curve through this phase-space point.
    pub fn to_curve(&self) -> Result<CurveState> {
        let d = ostro_flow_rhs(self)?;
        let (u, r) = (&self.u, &self.r);
        let a = d.u.clone();
        let j = r * (2.0 * u.dot(&a)) + &d.r * u.norm_squared() - u * (2.0 * (a.dot(r) + u.dot(&d.r))) - &a * (2.0 * u.dot(r));
        Ok(CurveState::with_jerk(self.x.clone(), u.clone(), a, j))
    }
}

fn nonnull(u: &DVector<f64>) -> Result<f64> {
    let u2 = u.norm_squared();
    if u2 < 1e-14 {
        return Err(Error::NullVelocity(u2));
    }
    Ok(u2)
}

/// `H = ½|U|²|R|² − ⟨U,R⟩² + ⟨P,U⟩`
pub fn ostro_hamiltonian(s: &OstrogradskyState) -> f64 {
    let ur = s.u.dot(&s.r);
    0.5 * s.u.norm_squared() * s.r.norm_squared() - ur * ur + s.p.dot(&s.u)
}

/// Hamilton's equations, returned as a state of time derivatives.
pub fn ostro_flow_rhs(s: &OstrogradskyState) -> Result<OstrogradskyState> {
    if [&s.u, &s.p, &s.r].iter().any(|v| v.len() != s.x.len()) {
        return Err(Error::DimensionMismatch { expected: s.x.len(), got: s.u.len().max(s.p.len()).max(s.r.len()) });
    }
    let (u, r) = (&s.u, &s.r);
    let ur = u.dot(r);
    Ok(OstrogradskyState {
        x: u.clone(),
        u: r * u.norm_squared() - u * (2.0 * ur),
        r: -u * r.norm_squared() + r * (2.0 * ur) - &s.p,
        p: DVector::zeros(s.dim()),
    })
}

pub struct OstrogradskyFlow {
    pub dim: usize,
}

impl Flow for OstrogradskyFlow {
    fn len(&self) -> usize {
        4 * self.dim
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let d = ostro_flow_rhs(&OstrogradskyState::from_flat(self.dim, y)?)?;
        dy.copy_from_slice(&d.to_vec());
        Ok(())
    }
}

/// Integrates the canonical system; the trajectory has fields `x, U, R, P`.
pub fn run_ostrogradsky(s0: &OstrogradskyState, times: &[f64], settings: &Settings) -> Result<Trajectory> {
    let flow = OstrogradskyFlow { dim: s0.dim() };
    let (states, stats) = integrate(&flow, &s0.to_vec(), times, settings)?;
    Ok(Trajectory {
        dim: s0.dim(),
        fields: ["x", "U", "R", "P"].map(String::from).to_vec(),
        times: times.to_vec(),
        states,
        meta: Metadata {
            metric: "flat-euclidean".into(),
            equation: "ostrogradsky".into(),
            method: settings.method.name().into(),
            atol: settings.atol,
            rtol: settings.rtol,
            stats,
        },
    })
}
