//! Curve equations written as first-order systems in `(x, U, A[, J])`, where `U` is
//! the coordinate velocity and `A`, `J` are covariant derivatives along the curve.

use nalgebra::DVector;

use super::quantities::{conformal_geodesic_jerk, flat_jerk_from_c, mercator_snap};
use crate::error::{Error, Result};
use crate::geometry::{geometry_jet, GeometryJet, JetLevel, MetricSpec};
use crate::integrate::{integrate, Flow, Settings};
use crate::state::CurveState;
use crate::trajectory::{Metadata, Trajectory};

#[derive(Clone, Debug, PartialEq)]
pub enum Equation {
    /// Third-order conformal geodesic equation `E = 0`.
    ConformalGeodesic,
    /// Fourth-order conformal Mercator equation.
    Mercator,
    /// Flat-space Mercator equation in third-order form with a fixed first integral `C`.
    FlatMercator(DVector<f64>),
    Geodesic,
}

impl Equation {
    pub fn id(&self) -> &'static str {
        match self {
            Equation::ConformalGeodesic => "cg3",
            Equation::Mercator | Equation::FlatMercator(_) => "mercator4",
            Equation::Geodesic => "geodesic",
        }
    }

    fn fields(&self) -> &'static [&'static str] {
        match self {
            Equation::ConformalGeodesic => &["x", "U", "A"],
            Equation::Mercator | Equation::FlatMercator(_) => &["x", "U", "A", "J"],
            Equation::Geodesic => &["x", "U"],
        }
    }

    /// Blocks actually integrated (the flat form reconstructs `J` from `C`).
    fn integrated_blocks(&self) -> usize {
        match self {
            Equation::ConformalGeodesic | Equation::FlatMercator(_) => 3,
            Equation::Mercator => 4,
            Equation::Geodesic => 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CurveFlow {
    pub metric: MetricSpec,
    pub equation: Equation,
}

impl CurveFlow {
    pub fn new(metric: MetricSpec, equation: Equation) -> Result<Self> {
        if let Equation::FlatMercator(c) = &equation {
            if !metric.is_flat() {
                return Err(Error::NotFlat);
            }
            if c.len() != metric.dim() {
                return Err(Error::DimensionMismatch { expected: metric.dim(), got: c.len() });
            }
        }
        Ok(CurveFlow { metric, equation })
    }

    pub fn conformal_geodesic(metric: MetricSpec) -> Self {
        CurveFlow { metric, equation: Equation::ConformalGeodesic }
    }

    pub fn mercator(metric: MetricSpec) -> Self {
        CurveFlow { metric, equation: Equation::Mercator }
    }

    pub fn flat_mercator(metric: MetricSpec, c: DVector<f64>) -> Result<Self> {
        Self::new(metric, Equation::FlatMercator(c))
    }

    pub fn geodesic(metric: MetricSpec) -> Self {
        CurveFlow { metric, equation: Equation::Geodesic }
    }

    fn level(&self) -> JetLevel {
        match self.equation {
            Equation::Mercator => JetLevel::Full,
            _ => JetLevel::Curvature,
        }
    }

    pub fn jet(&self, x: &[f64]) -> Result<GeometryJet> {
        geometry_jet(&self.metric, x, self.level())
    }

    /// Flattened initial vector for this equation. The fourth-order equation needs the jerk.
    pub fn initial_vector(&self, s: &CurveState) -> Result<Vec<f64>> {
        let n = self.metric.dim();
        if s.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: s.dim() });
        }
        let mut v: Vec<f64> = s.x.iter().chain(s.u.iter()).copied().collect();
        if self.equation.integrated_blocks() >= 3 {
            v.extend(s.a.iter());
        }
        if self.equation.integrated_blocks() == 4 {
            v.extend(s.jerk()?.iter());
        }
        Ok(v)
    }

    /// Integrates and records samples at `times`.
    pub fn run(&self, s0: &CurveState, times: &[f64], settings: &Settings) -> Result<Trajectory> {
        let y0 = self.initial_vector(s0)?;
        let (mut ys, stats) = integrate(self, &y0, times, settings)?;
        if let Equation::FlatMercator(c) = &self.equation {
            let n = self.metric.dim();
            for y in ys.iter_mut() {
                let jet = self.jet(&y[..n])?;
                let s = CurveState::from_flat(n, y)?;
                let j = flat_jerk_from_c(&jet, &s, c)?;
                y.extend(j.iter());
            }
        }
        Ok(Trajectory {
            dim: self.metric.dim(),
            fields: self.equation.fields().iter().map(|s| s.to_string()).collect(),
            times: times.to_vec(),
            states: ys,
            meta: Metadata {
                metric: self.metric.name().to_string(),
                equation: self.equation.id().to_string(),
                method: settings.method.name().to_string(),
                atol: settings.atol,
                rtol: settings.rtol,
                stats,
            },
        })
    }
}

impl Flow for CurveFlow {
    fn len(&self) -> usize {
        self.metric.dim() * self.equation.integrated_blocks()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.metric.dim();
        let block = |k: usize| DVector::from_column_slice(&y[k * n..(k + 1) * n]);
        let jet = self.jet(&y[..n])?;
        let x = block(0);
        let u = block(1);
        dy[..n].copy_from_slice(&y[n..2 * n]);
        if self.equation == Equation::Geodesic {
            let du = -jet.gamma(&u, &u);
            dy[n..2 * n].copy_from_slice(du.as_slice());
            return Ok(());
        }
        let a = block(2);
        let du = &a - jet.gamma(&u, &u);
        dy[n..2 * n].copy_from_slice(du.as_slice());
        let state = CurveState::new(x, u.clone(), a.clone());
        match &self.equation {
            Equation::ConformalGeodesic => {
                let j = conformal_geodesic_jerk(&jet, &state)?;
                dy[2 * n..].copy_from_slice((j - jet.gamma(&u, &a)).as_slice());
            }
            Equation::FlatMercator(c) => {
                let j = flat_jerk_from_c(&jet, &state, c)?;
                dy[2 * n..].copy_from_slice((j - jet.gamma(&u, &a)).as_slice());
            }
            Equation::Mercator => {
                let j = block(3);
                let state = CurveState { j: Some(j.clone()), ..state };
                let snap = mercator_snap(&jet, &state)?;
                dy[2 * n..3 * n].copy_from_slice((&j - jet.gamma(&u, &a)).as_slice());
                dy[3 * n..].copy_from_slice((snap - jet.gamma(&u, &j)).as_slice());
            }
            Equation::Geodesic => unreachable!(),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::linspace;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn straight_lines() {
        let m = MetricSpec::euclidean(3);
        let s = CurveState::with_jerk(v(&[1.0, 0.0, 0.0]), v(&[0.5, 1.0, 0.0]), v(&[0.0; 3]), v(&[0.0; 3]));
        let times = linspace(0.0, 2.0, 5);
        for f in [
            CurveFlow::conformal_geodesic(m.clone()),
            CurveFlow::mercator(m.clone()),
            CurveFlow::geodesic(m.clone()),
            CurveFlow::flat_mercator(m.clone(), v(&[0.0; 3])).unwrap(),
        ] {
            let tr = f.run(&s, &times, &Settings::default()).unwrap();
            let last = tr.position(4);
            assert!((last - v(&[2.0, 2.0, 0.0])).amax() < 1e-12, "{}", f.equation.id());
        }
    }

    #[test]
    fn flat_c_form_needs_flat_metric() {
        assert_eq!(
            CurveFlow::flat_mercator(MetricSpec::round_sphere(3), v(&[0.0; 3])).unwrap_err(),
            Error::NotFlat
        );
    }

    #[test]
    fn mercator_needs_jerk() {
        let s = CurveState::new(v(&[0.0; 3]), v(&[1.0, 0.0, 0.0]), v(&[0.0; 3]));
        assert_eq!(CurveFlow::mercator(MetricSpec::euclidean(3)).initial_vector(&s), Err(Error::MissingJerk));
    }
}
