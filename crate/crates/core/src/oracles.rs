//! Closed-form flat-space solutions and exact maps, with derivatives taken from
//! truncated Taylor series rather than finite differences.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{lift, GeometryJet};
use crate::series::{self, Series, SeriesPoint};
use crate::state::CurveState;

const PARAM_TOL: f64 = 1e-12;
pub const POLE_TOL: f64 = 1e-12;

/// Projectively parametrised circle `X₀ + (tU₀ + t²A₀)/(1 + t²|A₀|²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleParams {
    pub x0: Vec<f64>,
    pub u0: Vec<f64>,
    pub a0: Vec<f64>,
}

impl CircleParams {
    pub fn new(x0: &[f64], u0: &[f64], a0: &[f64]) -> Result<Self> {
        let p = CircleParams { x0: x0.to_vec(), u0: u0.to_vec(), a0: a0.to_vec() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x0.len();
        if self.u0.len() != n || self.a0.len() != n {
            return Err(Error::BadParams("circle vectors differ in length".into()));
        }
        let uu: f64 = self.u0.iter().map(|v| v * v).sum();
        let ua: f64 = self.u0.iter().zip(&self.a0).map(|(a, b)| a * b).sum();
        if (uu - 1.0).abs() > PARAM_TOL {
            return Err(Error::BadParams(format!("|U0|^2 = {uu}, expected 1")));
        }
        if ua.abs() > PARAM_TOL {
            return Err(Error::BadParams(format!("<U0,A0> = {ua}, expected 0")));
        }
        Ok(())
    }

    pub fn series(&self, t: Series) -> SeriesPoint {
        let a2: f64 = self.a0.iter().map(|v| v * v).sum();
        let den = (t * t * a2 + 1.0).recip();
        (0..self.x0.len())
            .map(|i| (t * self.u0[i] + t * t * self.a0[i]) * den + self.x0[i])
            .collect()
    }
}

/// Logarithmic spiral `eᵗcos(ct)P₀ + eᵗsin(ct)Q₀ + R₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpiralParams {
    pub p0: Vec<f64>,
    pub q0: Vec<f64>,
    pub r0: Vec<f64>,
    pub c: f64,
}

impl SpiralParams {
    pub fn new(p0: &[f64], q0: &[f64], r0: &[f64], c: f64) -> Result<Self> {
        let s = SpiralParams { p0: p0.to_vec(), q0: q0.to_vec(), r0: r0.to_vec(), c };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.p0.len();
        if self.q0.len() != n || self.r0.len() != n {
            return Err(Error::BadParams("spiral vectors differ in length".into()));
        }
        if self.c == 0.0 {
            return Err(Error::BadParams("spiral pitch c must be nonzero".into()));
        }
        let pp: f64 = self.p0.iter().map(|v| v * v).sum();
        let qq: f64 = self.q0.iter().map(|v| v * v).sum();
        let pq: f64 = self.p0.iter().zip(&self.q0).map(|(a, b)| a * b).sum();
        if pp == 0.0 || (pp - qq).abs() > PARAM_TOL * pp.max(1.0) || pq.abs() > PARAM_TOL * pp.max(1.0) {
            return Err(Error::BadParams("spiral needs <P0,Q0> = 0 and |P0| = |Q0| > 0".into()));
        }
        Ok(())
    }

    pub fn series(&self, t: Series) -> SeriesPoint {
        let e = t.exp();
        let ct = t * self.c;
        let (co, si) = (e * ct.cos(), e * ct.sin());
        (0..self.p0.len())
            .map(|i| co * self.p0[i] + si * self.q0[i] + self.r0[i])
            .collect()
    }

    /// Polar radius about `R₀` predicted by `r = |P₀| e^{θ/c}` for the unwrapped angle θ.
    pub fn polar_radius(&self, theta: f64) -> f64 {
        let p: f64 = self.p0.iter().map(|v| v * v).sum::<f64>().sqrt();
        p * (theta / self.c).exp()
    }

    /// Polar coordinates `(r, θ)` of `x` in the `(P₀, Q₀)` frame centred at `R₀`, θ in (−π, π].
    pub fn polar(&self, x: &[f64]) -> (f64, f64) {
        let pp: f64 = self.p0.iter().map(|v| v * v).sum();
        let d: Vec<f64> = x.iter().zip(&self.r0).map(|(a, b)| a - b).collect();
        let px: f64 = d.iter().zip(&self.p0).map(|(a, b)| a * b).sum::<f64>() / pp.sqrt();
        let qx: f64 = d.iter().zip(&self.q0).map(|(a, b)| a * b).sum::<f64>() / pp.sqrt();
        (px.hypot(qx), qx.atan2(px))
    }
}

/// `Y = (X − |X|²B)/(1 − 2⟨X,B⟩ + |B|²|X|²)`; its inverse is the same map with `−B`.
pub fn special_conformal(x: &DVector<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let xs = series::constant_point(x.as_slice());
    let y = special_conformal_series(&xs, b.as_slice())?;
    Ok(DVector::from_iterator(y.len(), y.iter().map(|s| s.c[0])))
}

pub fn special_conformal_series(x: &[Series], b: &[f64]) -> Result<SeriesPoint> {
    if x.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: b.len() });
    }
    let bs = series::constant_point(b);
    let xx = series::dot(x, x);
    let xb = series::dot(x, &bs);
    let bb: f64 = b.iter().map(|v| v * v).sum();
    let den = Series::constant(1.0) - xb * 2.0 + xx * bb;
    if den.c[0].abs() < POLE_TOL {
        return Err(Error::PoleHit);
    }
    let inv = den.recip();
    Ok(x.iter().zip(b).map(|(xi, bi)| (*xi - xx * *bi) * inv).collect())
}

/// Inverse stereographic projection `ℝⁿ → Sⁿ ⊂ ℝⁿ⁺¹`, `x ↦ (2x, |x|² − 1)/(|x|² + 1)`.
/// In these coordinates the round metric is `(2/(1+|x|²))² δ`.
pub fn to_sphere(x: &DVector<f64>) -> DVector<f64> {
    let xs = series::constant_point(x.as_slice());
    let y = to_sphere_series(&xs);
    DVector::from_iterator(y.len(), y.iter().map(|s| s.c[0]))
}

pub fn to_sphere_series(x: &[Series]) -> SeriesPoint {
    let xx = series::dot(x, x);
    let inv = (xx + 1.0).recip();
    let mut y: SeriesPoint = x.iter().map(|xi| *xi * inv * 2.0).collect();
    y.push((xx + (-1.0)) * inv);
    y
}

/// Stereographic projection from the pole `(0, …, 0, 1)`.
pub fn from_sphere(y: &DVector<f64>) -> Result<DVector<f64>> {
    let n = y.len() - 1;
    let den = 1.0 - y[n];
    if den.abs() < POLE_TOL {
        return Err(Error::PoleHit);
    }
    Ok(DVector::from_iterator(n, y.iter().take(n).map(|v| v / den)))
}

/// Angle between a chart curve through `x` with velocity `v` and the meridian
/// through its image on the sphere, in `[0, π/2]`.
pub fn meridian_angle(x: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    let t = Series::variable(0.0);
    let path: SeriesPoint = x.iter().zip(v.iter()).map(|(xi, vi)| t * *vi + *xi).collect();
    let y = to_sphere_series(&path);
    let pos = DVector::from_iterator(y.len(), y.iter().map(|s| s.c[0]));
    let tan = DVector::from_iterator(y.len(), y.iter().map(|s| s.deriv(1)));
    let n = y.len() - 1;
    let mut pole = DVector::zeros(n + 1);
    pole[n] = 1.0;
    let meridian = &pole - &pos * pos[n];
    let (mn, tn) = (meridian.norm(), tan.norm());
    if mn < POLE_TOL {
        return Err(Error::PoleHit);
    }
    if tn == 0.0 {
        return Err(Error::NullVelocity(0.0));
    }
    Ok((tan.dot(&meridian).abs() / (mn * tn)).min(1.0).acos())
}

/// Flat first integral `C = (½|A|²/|U|⁴ − 2⟨A,U⟩²/|U|⁶)U + (⟨A,U⟩/|U|⁴)A` of conformal geodesics.
pub fn first_integral_c(u: &DVector<f64>, a: &DVector<f64>) -> Result<DVector<f64>> {
    let u2 = u.norm_squared();
    if u2 < crate::dynamics::NULL_SPEED2 {
        return Err(Error::NullVelocity(u2));
    }
    let ua = u.dot(a);
    let aa = a.norm_squared();
    Ok(u * (0.5 * aa / (u2 * u2) - 2.0 * ua * ua / (u2 * u2 * u2)) + a * (ua / (u2 * u2)))
}

/// A closed-form curve: circle, spiral, or the image of one under a special conformal map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OracleCurve {
    Circle(CircleParams),
    Spiral(SpiralParams),
    ConformalImage { base: Box<OracleCurve>, b: Vec<f64> },
}

impl OracleCurve {
    pub fn dim(&self) -> usize {
        match self {
            OracleCurve::Circle(p) => p.x0.len(),
            OracleCurve::Spiral(p) => p.p0.len(),
            OracleCurve::ConformalImage { base, .. } => base.dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OracleCurve::Circle(p) => p.validate(),
            OracleCurve::Spiral(p) => p.validate(),
            OracleCurve::ConformalImage { base, b } => {
                if b.len() != base.dim() {
                    return Err(Error::DimensionMismatch { expected: base.dim(), got: b.len() });
                }
                base.validate()
            }
        }
    }

    pub fn series_at(&self, t: f64) -> Result<SeriesPoint> {
        self.series(Series::variable(t))
    }

    pub fn series(&self, t: Series) -> Result<SeriesPoint> {
        match self {
            OracleCurve::Circle(p) => Ok(p.series(t)),
            OracleCurve::Spiral(p) => Ok(p.series(t)),
            OracleCurve::ConformalImage { base, b } => special_conformal_series(&base.series(t)?, b),
        }
    }

    pub fn point(&self, t: f64) -> Result<DVector<f64>> {
        Ok(self.derivatives(t)?.swap_remove(0))
    }

    /// `[X, X', X'', X''', X'''']` at `t`.
    pub fn derivatives(&self, t: f64) -> Result<Vec<DVector<f64>>> {
        Ok(series::derivatives(&self.series_at(t)?))
    }

    /// Covariant state with jerk, plus the snap, with respect to `jet` (taken at the curve point).
    pub fn state(&self, jet: &GeometryJet, t: f64) -> Result<(CurveState, DVector<f64>)> {
        let d = self.derivatives(t)?;
        state_from_coordinates(jet, &d)
    }
}

/// Covariant `(x, U, A, J)` and snap from coordinate derivatives `[x, x', …, x'''']`.
pub fn state_from_coordinates(jet: &GeometryJet, d: &[DVector<f64>]) -> Result<(CurveState, DVector<f64>)> {
    let cov = lift::covariant_from_coordinates(jet, &d[1..5])?;
    Ok((CurveState::with_jerk(d[0].clone(), cov[0].clone(), cov[1].clone(), cov[2].clone()), cov[3].clone()))
}

/// Residuals of the arc-length reduction of the flat fourth-order equation along a curve:
/// with `ḣ = |U|`, `u = U/ḣ`, `H = ḧ/ḣ`, the vector equation `ü + (H² − 3Ḣ + m)u − ḣC = 0`
/// and the scalar constraint `⟨C,u⟩ = −Ḣ/ḣ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArclengthResidual {
    /// The constant `m` fitted at each sample.
    pub m: Vec<f64>,
    pub max_vector_residual: f64,
    pub max_constraint_residual: f64,
    pub m_spread: f64,
}

pub fn arclength_residual(curve: &OracleCurve, c: &DVector<f64>, times: &[f64]) -> Result<ArclengthResidual> {
    let n = curve.dim();
    let mut ms = Vec::new();
    let mut vmax: f64 = 0.0;
    let mut cmax: f64 = 0.0;
    for &t in times {
        let x = curve.series_at(t)?;
        // velocity series, shifted one order down
        let u: Vec<Series> = x
            .iter()
            .map(|s| {
                let mut d = Series::constant(0.0);
                for k in 0..series::DEGREE {
                    d.c[k] = s.c[k + 1] * (k + 1) as f64;
                }
                d
            })
            .collect();
        let hd = series::dot(&u, &u).sqrt();
        let inv = hd.recip();
        let unit: Vec<Series> = u.iter().map(|ui| *ui * inv).collect();
        let hdot = hd.deriv(0);
        let big_h = hd.deriv(1) / hdot;
        let big_hd = hd.deriv(2) / hdot - big_h * big_h;
        let uv = DVector::from_iterator(n, unit.iter().map(|s| s.deriv(0)));
        let udd = DVector::from_iterator(n, unit.iter().map(|s| s.deriv(2)));
        let base = &udd + &uv * (big_h * big_h - 3.0 * big_hd) - c * hdot;
        // |u| = 1, so the best m is −⟨base, u⟩
        let m = -base.dot(&uv);
        vmax = vmax.max((base + &uv * m).amax());
        cmax = cmax.max((c.dot(&uv) + big_hd / hdot).abs());
        ms.push(m);
    }
    let lo = ms.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ArclengthResidual { m: ms, max_vector_residual: vmax, max_constraint_residual: cmax, m_spread: hi - lo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics;
    use crate::geometry::{geometry_jet, JetLevel, MetricSpec};

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn flat3() -> GeometryJet {
        geometry_jet(&MetricSpec::euclidean(3), &[0.0; 3], JetLevel::Full).unwrap()
    }

    fn unit_circle() -> OracleCurve {
        OracleCurve::Circle(CircleParams::new(&[0.0; 3], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap())
    }

    #[test]
    fn circle_values() {
        let c = unit_circle();
        let d = c.derivatives(0.0).unwrap();
        assert_eq!(d[0], v(&[0.0; 3]));
        assert_eq!(d[1], v(&[1.0, 0.0, 0.0]));
        assert!((c.point(1.0).unwrap() - v(&[0.5, 0.5, 0.0])).amax() < 1e-15);
        assert!(CircleParams::new(&[0.0; 3], &[1.0, 0.0, 0.0], &[1.0, 1.0, 0.0]).is_err());
        assert!(CircleParams::new(&[0.0; 3], &[2.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn circle_solves_flat_conformal_geodesic_equation() {
        let c = OracleCurve::Circle(CircleParams::new(&[1.0, -1.0, 0.5], &[0.6, 0.8, 0.0], &[-0.4, 0.3, 1.2]).unwrap());
        let j = flat3();
        for k in 0..21 {
            let t = -2.0 + 0.2 * k as f64;
            let (s, _) = c.state(&j, t).unwrap();
            assert!(dynamics::e_vector(&j, &s).unwrap().amax() < 1e-10);
        }
    }

    #[test]
    fn spiral_values_and_polar_law() {
        let p = SpiralParams::new(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.5, 0.5, 0.0], 2.0).unwrap();
        let s = OracleCurve::Spiral(p.clone());
        assert!((s.point(0.0).unwrap() - v(&[1.5, 0.5, 0.0])).amax() < 1e-15);
        for k in 0..10 {
            let t = 0.1 * k as f64;
            let x = s.point(t).unwrap();
            let (r, theta) = p.polar(x.as_slice());
            // unwrap by the known winding: θ = ct mod 2π
            let unwrapped = theta + (2.0 * std::f64::consts::PI) * ((2.0 * t - theta) / (2.0 * std::f64::consts::PI)).round();
            assert!((r - p.polar_radius(unwrapped)).abs() < 1e-12);
        }
        assert!(SpiralParams::new(&[1.0, 0.0], &[0.0, 2.0], &[0.0, 0.0], 1.0).is_err());
        assert!(SpiralParams::new(&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn spiral_solves_reduced_equation() {
        let s = OracleCurve::Spiral(SpiralParams::new(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 2.0, 0.0], 1.5).unwrap());
        let j = flat3();
        for k in 0..11 {
            let (st, _) = s.state(&j, -1.0 + 0.2 * k as f64).unwrap();
            let c = dynamics::mercator_c(&j, &st).unwrap();
            assert!(c.amax() < 1e-10);
        }
    }

    #[test]
    fn special_conformal_identity_and_inverse() {
        let x = v(&[0.3, -0.2, 0.7]);
        assert_eq!(special_conformal(&x, &v(&[0.0; 3])).unwrap(), x);
        let b = v(&[0.1, 0.05, -0.2]);
        let y = special_conformal(&x, &b).unwrap();
        let back = special_conformal(&y, &(-&b)).unwrap();
        assert!((back - x).amax() < 1e-14);
        // X = B/|B|² sends the denominator to zero
        let pole = &b / b.norm_squared();
        assert_eq!(special_conformal(&pole, &b), Err(Error::PoleHit));
    }

    #[test]
    fn stereographic_roundtrip() {
        assert_eq!(to_sphere(&v(&[0.0; 3])), v(&[0.0, 0.0, 0.0, -1.0]));
        let x = v(&[0.4, -1.3, 2.2]);
        let y = to_sphere(&x);
        assert!((y.norm() - 1.0).abs() < 1e-15);
        assert!((from_sphere(&y).unwrap() - x).amax() < 1e-12);
        assert_eq!(from_sphere(&v(&[0.0, 0.0, 0.0, 1.0])), Err(Error::PoleHit));
    }

    #[test]
    fn first_integral_examples() {
        let c = first_integral_c(&v(&[1.0, 0.0, 0.0]), &v(&[0.0, 2.0, 0.0])).unwrap();
        assert!((c - v(&[2.0, 0.0, 0.0])).amax() < 1e-15);
        assert_eq!(first_integral_c(&v(&[1.0, 2.0, 0.0]), &v(&[0.0; 3])).unwrap(), v(&[0.0; 3]));
        let circ = unit_circle();
        let c0 = {
            let d = circ.derivatives(0.0).unwrap();
            first_integral_c(&d[1], &d[2]).unwrap()
        };
        for k in 0..11 {
            let d = circ.derivatives(-1.0 + 0.2 * k as f64).unwrap();
            assert!((first_integral_c(&d[1], &d[2]).unwrap() - &c0).amax() < 1e-10);
        }
    }

    #[test]
    fn spiral_arclength_reduction() {
        let c = 2.0;
        let s = OracleCurve::Spiral(SpiralParams::new(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0; 3], c).unwrap());
        let times: Vec<f64> = (0..11).map(|k| -1.0 + 0.2 * k as f64).collect();
        let r = arclength_residual(&s, &v(&[0.0; 3]), &times).unwrap();
        assert!(r.max_vector_residual < 1e-10);
        assert!(r.max_constraint_residual < 1e-10);
        assert!(r.m_spread < 1e-10);
        assert!((r.m[0] - (c * c - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn meridian_angle_of_radial_and_circular_motion() {
        let x = v(&[0.5, 0.0, 0.0]);
        assert!(meridian_angle(&x, &v(&[1.0, 0.0, 0.0])).unwrap() < 1e-7);
        let a = meridian_angle(&x, &v(&[0.0, 1.0, 0.0])).unwrap();
        assert!((a - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
