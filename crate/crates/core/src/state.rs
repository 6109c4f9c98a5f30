use nalgebra::DVector;

use crate::error::{Error, Result};

/// Position with covariant velocity, acceleration and optionally jerk of a curve
/// at one parameter value: `U = dX/dt`, `A = ∇_U U`, `J = ∇_U A`.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveState {
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub a: DVector<f64>,
    pub j: Option<DVector<f64>>,
}

impl CurveState {
    pub fn new(x: DVector<f64>, u: DVector<f64>, a: DVector<f64>) -> Self {
        CurveState { x, u, a, j: None }
    }

    pub fn with_jerk(x: DVector<f64>, u: DVector<f64>, a: DVector<f64>, j: DVector<f64>) -> Self {
        CurveState { x, u, a, j: Some(j) }
    }

    pub fn from_slices(x: &[f64], u: &[f64], a: &[f64], j: Option<&[f64]>) -> Result<Self> {
        let n = x.len();
        for v in [u, a].into_iter().chain(j) {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
        }
        Ok(CurveState {
            x: DVector::from_column_slice(x),
            u: DVector::from_column_slice(u),
            a: DVector::from_column_slice(a),
            j: j.map(DVector::from_column_slice),
        })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn jerk(&self) -> Result<&DVector<f64>> {
        self.j.as_ref().ok_or(Error::MissingJerk)
    }

    /// Flattened `[x, U, A]` or `[x, U, A, J]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.x.iter().chain(self.u.iter()).chain(self.a.iter()).copied().collect();
        if let Some(j) = &self.j {
            v.extend(j.iter());
        }
        v
    }

    pub fn from_flat(n: usize, v: &[f64]) -> Result<Self> {
        let seg = |k: usize| DVector::from_column_slice(&v[k * n..(k + 1) * n]);
        match v.len() / n.max(1) {
            3 if v.len() == 3 * n => Ok(CurveState::new(seg(0), seg(1), seg(2))),
            4 if v.len() == 4 * n => Ok(CurveState::with_jerk(seg(0), seg(1), seg(2), seg(3))),
            _ => Err(Error::DimensionMismatch { expected: 4 * n, got: v.len() }),
        }
    }
}
