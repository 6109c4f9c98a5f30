use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::oracles::OracleCurve;
use crate::series::{self, Series, SeriesPoint};

/// Anything that can report coordinate derivatives `[x, x', x'', x''', x'''']` at `t`.
/// Variation fields use the same interface for `[V, V', V'', V''', V'''']`.
pub trait CurveSource: Sync {
    fn dim(&self) -> usize;
    fn derivatives(&self, t: f64) -> Result<Vec<DVector<f64>>>;
}

impl CurveSource for OracleCurve {
    fn dim(&self) -> usize {
        OracleCurve::dim(self)
    }
    fn derivatives(&self, t: f64) -> Result<Vec<DVector<f64>>> {
        OracleCurve::derivatives(self, t)
    }
}

/// A curve given by a closure over Taylor series.
pub struct SeriesCurve<F> {
    pub dim: usize,
    pub f: F,
}

impl<F> CurveSource for SeriesCurve<F>
where
    F: Fn(Series) -> Result<SeriesPoint> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn derivatives(&self, t: f64) -> Result<Vec<DVector<f64>>> {
        Ok(series::derivatives(&(self.f)(Series::variable(t))?))
    }
}

/// Variation fields used by the stationarity panel and the first-variation checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariationField {
    /// `((t − a)(b − t))⁴ · dir` on `[a, b]`, zero elsewhere; three times continuously differentiable.
    Bump { a: f64, b: f64, dir: Vec<f64> },
    /// `Σ_k coeffs[k] (t − centre)^k`.
    Polynomial { centre: f64, coeffs: Vec<Vec<f64>> },
    /// Weighted sum of fields.
    Combination(Vec<(f64, VariationField)>),
    /// `amp · sin(freq·t + phase)`.
    Wave { amp: Vec<f64>, freq: f64, phase: f64 },
}

impl VariationField {
    pub fn bump(a: f64, b: f64, dir: Vec<f64>) -> Self {
        VariationField::Bump { a, b, dir }
    }

    pub fn polynomial(centre: f64, coeffs: Vec<Vec<f64>>) -> Self {
        VariationField::Polynomial { centre, coeffs }
    }

    pub fn combination(terms: Vec<(f64, VariationField)>) -> Self {
        VariationField::Combination(terms)
    }

    pub fn wave(amp: Vec<f64>, freq: f64, phase: f64) -> Self {
        VariationField::Wave { amp, freq, phase }
    }

    fn len(&self) -> usize {
        match self {
            VariationField::Bump { dir, .. } => dir.len(),
            VariationField::Polynomial { coeffs, .. } => coeffs[0].len(),
            VariationField::Combination(terms) => terms[0].1.len(),
            VariationField::Wave { amp, .. } => amp.len(),
        }
    }

    pub fn series(&self, t: Series) -> SeriesPoint {
        match self {
            VariationField::Bump { a, b, dir } => {
                let inside = t.c[0] >= *a && t.c[0] <= *b;
                if !inside {
                    return vec![Series::constant(0.0); dir.len()];
                }
                let q = (t + (-a)) * (-t + *b);
                let q2 = q * q;
                let r = q2 * q2;
                dir.iter().map(|d| r * *d).collect()
            }
            VariationField::Polynomial { centre, coeffs } => {
                let s = t + (-centre);
                let n = coeffs[0].len();
                let mut out = vec![Series::constant(0.0); n];
                let mut pow = Series::constant(1.0);
                for c in coeffs {
                    for i in 0..n {
                        out[i] = out[i] + pow * c[i];
                    }
                    pow = pow * s;
                }
                out
            }
            VariationField::Combination(terms) => {
                let n = self.len();
                let mut out = vec![Series::constant(0.0); n];
                for (w, f) in terms {
                    for (o, v) in out.iter_mut().zip(f.series(t)) {
                        *o = *o + v * *w;
                    }
                }
                out
            }
            VariationField::Wave { amp, freq, phase } => {
                let s = (t * *freq + *phase).sin();
                amp.iter().map(|a| s * *a).collect()
            }
        }
    }
}

impl CurveSource for VariationField {
    fn dim(&self) -> usize {
        self.len()
    }
    fn derivatives(&self, t: f64) -> Result<Vec<DVector<f64>>> {
        Ok(series::derivatives(&self.series(Series::variable(t))))
    }
}
