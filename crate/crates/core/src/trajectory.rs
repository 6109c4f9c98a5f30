use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::Stats;
use crate::state::CurveState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub metric: String,
    pub equation: String,
    pub method: String,
    pub atol: f64,
    pub rtol: f64,
    pub stats: Stats,
}

/// Samples `(t, y)` of a flow. `fields` names the `n`-dimensional blocks of `y`,
/// e.g. `["x", "U", "A", "J"]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dim: usize,
    pub fields: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub meta: Metadata,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Column headers: `t, x1..xn, U1..Un, ...`.
    pub fn columns(&self) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        for f in &self.fields {
            for i in 1..=self.dim {
                cols.push(format!("{f}{i}"));
            }
        }
        cols
    }

    pub fn field(&self, i: usize, name: &str) -> Option<DVector<f64>> {
        let k = self.fields.iter().position(|f| f == name)?;
        let n = self.dim;
        Some(DVector::from_column_slice(&self.states[i][k * n..(k + 1) * n]))
    }

    pub fn position(&self, i: usize) -> DVector<f64> {
        self.field(i, "x").expect("every trajectory carries positions")
    }

    /// The sample as a curve state when the layout starts with `x, U, A`.
    pub fn curve_state(&self, i: usize) -> Result<CurveState> {
        let get = |name: &str| self.field(i, name).ok_or_else(|| Error::Config(format!("trajectory has no {name} field")));
        Ok(CurveState { x: get("x")?, u: get("U")?, a: get("A")?, j: self.field(i, "J") })
    }
}
