//! Standard tractors `(σ, μ, ρ)` in a fixed metric scale, the normal tractor
//! connection along a curve, and the velocity and acceleration tractors.

use nalgebra::DVector;
use serde::Serialize;

use crate::dynamics::{conformal_geodesic_jerk, speed2};
use crate::error::{Error, Result};
use crate::geometry::{ConformalFactor, GeometryJet};
use crate::state::CurveState;
use crate::trajectory::Trajectory;

#[derive(Clone, Debug, PartialEq)]
pub struct Tractor {
    pub sigma: f64,
    pub mu: DVector<f64>,
    pub rho: f64,
}

impl Tractor {
    pub fn new(sigma: f64, mu: DVector<f64>, rho: f64) -> Self {
        Tractor { sigma, mu, rho }
    }

    pub fn zero(n: usize) -> Self {
        Tractor { sigma: 0.0, mu: DVector::zeros(n), rho: 0.0 }
    }

    pub fn max_abs(&self) -> f64 {
        self.mu.amax().max(self.sigma.abs()).max(self.rho.abs())
    }

    fn axpy(&self, s: f64, o: &Tractor) -> Tractor {
        Tractor { sigma: self.sigma + s * o.sigma, mu: &self.mu + &o.mu * s, rho: self.rho + s * o.rho }
    }
}

/// `⟨X, Y⟩_T = ⟨μ, μ'⟩ + σρ' + ρσ'`.
pub fn tractor_inner(jet: &GeometryJet, x: &Tractor, y: &Tractor) -> f64 {
    jet.inner(&x.mu, &y.mu) + x.sigma * y.rho + x.rho * y.sigma
}

/// `|μ|² + 2σρ`.
pub fn tractor_norm(jet: &GeometryJet, x: &Tractor) -> f64 {
    tractor_inner(jet, x, x)
}

/// Components of the same tractor in the scale `ĝ = Ω²g`, from its components in `g`:
/// `σ̂ = Ωσ`, `μ̂ = Ω⁻¹(μ + σΥ♯)`, `ρ̂ = Ω⁻¹(ρ − Υ(μ) − ½|Υ|²σ)`.
/// The powers of `Ω` carry the weights 1, −1, −1 of the three slots.
pub fn tractor_transform(jet: &GeometryJet, x: &Tractor, factor: &ConformalFactor) -> Result<Tractor> {
    let om = factor.value(&jet.point)?;
    let ups = factor.upsilon(&jet.point)?;
    let ups_sharp = jet.raise(&ups);
    let u2 = ups.dot(&ups_sharp);
    Ok(Tractor {
        sigma: om * x.sigma,
        mu: (&x.mu + &ups_sharp * x.sigma) / om,
        rho: (x.rho - ups.dot(&x.mu) - 0.5 * u2 * x.sigma) / om,
    })
}

/// `U^a D_a X` for a tractor field along a curve, given `rate = (dσ/dt, ∇_U μ, dρ/dt)`:
/// `(σ' − ⟨U, μ⟩, ∇_U μ + σP♯(U) + ρU, ρ' − P(U, μ))`.
pub fn connection_derivative(jet: &GeometryJet, u: &DVector<f64>, x: &Tractor, rate: &Tractor) -> Tractor {
    Tractor {
        sigma: rate.sigma - jet.inner(u, &x.mu),
        mu: &rate.mu + jet.schouten_sharp_apply(u) * x.sigma + u * x.rho,
        rho: rate.rho - jet.schouten_form(u, &x.mu),
    }
}

fn speed(jet: &GeometryJet, u: &DVector<f64>) -> Result<f64> {
    let u2 = speed2(jet, u)?;
    if u2 < 0.0 {
        return Err(Error::NonSpacelikeVelocity(u2));
    }
    Ok(u2.sqrt())
}

/// `(0, U/|U|, −⟨U,A⟩/|U|³)`.
pub fn velocity_tractor(jet: &GeometryJet, s: &CurveState) -> Result<Tractor> {
    let n = speed(jet, &s.u)?;
    Ok(Tractor { sigma: 0.0, mu: &s.u / n, rho: -jet.inner(&s.u, &s.a) / (n * n * n) })
}

/// Derivative of the velocity tractor along the curve; needs the jerk.
pub fn acceleration_tractor(jet: &GeometryJet, s: &CurveState) -> Result<Tractor> {
    let (u, a) = (&s.u, &s.a);
    let j = s.jerk()?;
    let n = speed(jet, u)?;
    let (n2, n3) = (n * n, n * n * n);
    let ua = jet.inner(u, a);
    let rate = Tractor {
        sigma: 0.0,
        mu: a / n - u * (ua / n3),
        rho: -(jet.norm2(a) + jet.inner(u, j)) / n3 + 3.0 * ua * ua / (n3 * n2),
    };
    Ok(connection_derivative(jet, u, &velocity_tractor(jet, s)?, &rate))
}

/// `½⟨A, A⟩_T` for the acceleration tractor.
pub fn tractor_kinetic_energy(jet: &GeometryJet, s: &CurveState) -> Result<f64> {
    Ok(0.5 * tractor_norm(jet, &acceleration_tractor(jet, s)?))
}

/// Tractor derivative of a tractor field sampled on an equally spaced grid, by the
/// five-point central difference in `t` at the middle sample. `fields[k]` is the
/// field at `t + (k − 2)h` and `jet`, `u` are taken at the middle sample.
pub fn derivative_from_samples(jet: &GeometryJet, u: &DVector<f64>, fields: &[Tractor; 5], h: f64) -> Tractor {
    let d = fields[0]
        .axpy(-8.0, &fields[1])
        .axpy(8.0, &fields[3])
        .axpy(-1.0, &fields[4]);
    let mid = &fields[2];
    let coord = Tractor { sigma: d.sigma / (12.0 * h), mu: &d.mu / (12.0 * h), rho: d.rho / (12.0 * h) };
    let rate = Tractor { sigma: coord.sigma, mu: &coord.mu + jet.gamma(u, &mid.mu), rho: coord.rho };
    connection_derivative(jet, u, mid, &rate)
}

/// `dA/dt` at `t` for a curve given by `sample(t) = (jet, 3-jet state)`, with step `h`.
pub fn acceleration_derivative_along(
    sample: &dyn Fn(f64) -> Result<(GeometryJet, CurveState)>,
    t: f64,
    h: f64,
) -> Result<Tractor> {
    let mut fields = Vec::with_capacity(5);
    for k in -2..=2 {
        let (jet, s) = sample(t + k as f64 * h)?;
        fields.push(acceleration_tractor(&jet, &s)?);
    }
    let (jet, s) = sample(t)?;
    let fields: [Tractor; 5] = fields.try_into().expect("five samples");
    Ok(derivative_from_samples(&jet, &s.u, &fields, h))
}

/// Acceleration tractor at every sample of a trajectory. Conformal geodesic runs
/// carry no jerk, which is then recovered from the equation.
pub fn acceleration_tractors(
    traj: &Trajectory,
    jet_at: &dyn Fn(&[f64]) -> Result<GeometryJet>,
) -> Result<Vec<(GeometryJet, CurveState, Tractor)>> {
    (0..traj.len())
        .map(|i| {
            let mut s = traj.curve_state(i)?;
            let jet = jet_at(s.x.as_slice())?;
            if s.j.is_none() {
                s.j = Some(conformal_geodesic_jerk(&jet, &s)?);
            }
            let t = acceleration_tractor(&jet, &s)?;
            Ok((jet, s, t))
        })
        .collect()
}

/// Summary of the free-particle conditions `⟨A,A⟩_T = 0`, `dA/dt = 0` along a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreeParticleReport {
    pub max_norm: f64,
    pub min_norm: f64,
    /// Largest component of the tractor derivative over interior samples.
    pub max_derivative: f64,
}

pub fn free_particle_report(
    traj: &Trajectory,
    jet_at: &dyn Fn(&[f64]) -> Result<GeometryJet>,
) -> Result<FreeParticleReport> {
    if traj.len() < 5 {
        return Err(Error::BadParams("need at least five samples".into()));
    }
    let h = traj.times[1] - traj.times[0];
    let data = acceleration_tractors(traj, jet_at)?;
    let norms: Vec<f64> = data.iter().map(|(jet, _, t)| tractor_norm(jet, t)).collect();
    let mut max_derivative: f64 = 0.0;
    for i in 2..data.len() - 2 {
        let fields = [0, 1, 2, 3, 4].map(|k| data[i + k - 2].2.clone());
        let (jet, s, _) = &data[i];
        max_derivative = max_derivative.max(derivative_from_samples(jet, &s.u, &fields, h).max_abs());
    }
    Ok(FreeParticleReport {
        max_norm: norms.iter().map(|v| v.abs()).fold(0.0, f64::max),
        min_norm: norms.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min),
        max_derivative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::lagrangian;
    use crate::geometry::{geometry_jet, JetLevel, MetricSpec};

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn flat() -> GeometryJet {
        geometry_jet(&MetricSpec::euclidean(3), &[0.1, 0.2, 0.3], JetLevel::Curvature).unwrap()
    }

    #[test]
    fn norms_of_simple_tractors() {
        let j = flat();
        assert_eq!(tractor_norm(&j, &Tractor::new(1.0, v(&[0.0; 3]), 0.0)), 0.0);
        assert_eq!(tractor_norm(&j, &Tractor::new(0.0, v(&[1.0, 0.0, 0.0]), 0.0)), 1.0);
    }

    #[test]
    fn transform_identity_and_sigma_zero() {
        let j = flat();
        let x = Tractor::new(0.7, v(&[0.3, -0.2, 0.5]), -1.1);
        assert_eq!(tractor_transform(&j, &x, &ConformalFactor::identity()).unwrap(), x);
        let f = ConformalFactor::exponential(&[0.2, 0.5, -0.3]);
        let y = Tractor::new(0.0, v(&[0.3, -0.2, 0.5]), -1.1);
        let om = f.value(&j.point).unwrap();
        let t = tractor_transform(&j, &y, &f).unwrap();
        assert!((&t.mu * om - &y.mu).amax() < 1e-15);
        let shift = 0.2 * 0.3 + 0.5 * -0.2 - 0.3 * 0.5;
        assert!((t.rho * om - (y.rho - shift)).abs() < 1e-14);
    }

    #[test]
    fn transform_preserves_norm() {
        let j = geometry_jet(&MetricSpec::round_sphere(3), &[0.4, -0.1, 0.2], JetLevel::Curvature).unwrap();
        let f = ConformalFactor::parse("exp(0.3*x1) * (2 + x2)").unwrap();
        let hat = geometry_jet(&MetricSpec::round_sphere(3).rescale(&f), &[0.4, -0.1, 0.2], JetLevel::Curvature).unwrap();
        let x = Tractor::new(0.7, v(&[0.3, -0.2, 0.5]), -1.1);
        let y = tractor_transform(&j, &x, &f).unwrap();
        assert!((tractor_norm(&j, &x) - tractor_norm(&hat, &y)).abs() < 1e-12);
    }

    #[test]
    fn connection_on_constant_fields() {
        let j = flat();
        let u = v(&[1.0, 2.0, 0.0]);
        let x = Tractor::new(1.0, v(&[0.0; 3]), 1.0);
        let d = connection_derivative(&j, &u, &x, &Tractor::zero(3));
        assert_eq!(d, Tractor::new(0.0, u.clone(), 0.0));
    }

    #[test]
    fn velocity_and_acceleration_tractors() {
        let j = flat();
        let s = CurveState::with_jerk(v(&[0.0; 3]), v(&[1.0, 0.0, 0.0]), v(&[0.0, 2.0, 0.0]), v(&[-6.0, 0.0, 0.0]));
        assert_eq!(velocity_tractor(&j, &s).unwrap(), Tractor::new(0.0, v(&[1.0, 0.0, 0.0]), 0.0));
        // circle data: the acceleration tractor is null
        assert!(tractor_norm(&j, &acceleration_tractor(&j, &s).unwrap()).abs() < 1e-14);
        let line = CurveState::with_jerk(v(&[0.0; 3]), v(&[0.0, 3.0, 0.0]), v(&[0.0; 3]), v(&[0.0; 3]));
        let a = acceleration_tractor(&j, &line).unwrap();
        assert_eq!(a.mu, v(&[0.0; 3]));
        assert_eq!((a.rho, tractor_kinetic_energy(&j, &line).unwrap()), (0.0, 0.0));
        assert_eq!(a.sigma, -3.0);
    }

    #[test]
    fn kinetic_energy_is_the_lagrangian() {
        let j = geometry_jet(&MetricSpec::round_sphere(3), &[0.4, -0.1, 0.2], JetLevel::Curvature).unwrap();
        let s = CurveState::with_jerk(v(&[0.4, -0.1, 0.2]), v(&[0.3, 1.0, -0.2]), v(&[0.5, 0.1, 0.7]), v(&[-0.4, 0.9, 0.2]));
        let ke = tractor_kinetic_energy(&j, &s).unwrap();
        assert!((ke - lagrangian(&j, &s).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn timelike_velocity_is_rejected() {
        let j = geometry_jet(&MetricSpec::minkowski(4), &[0.0; 4], JetLevel::Curvature).unwrap();
        let s = CurveState::new(v(&[0.0; 4]), v(&[1.0, 0.0, 0.0, 0.0]), v(&[0.0; 4]));
        assert!(matches!(velocity_tractor(&j, &s), Err(Error::NonSpacelikeVelocity(_))));
    }
}
