//! Flat Kähler structures: magnetic geodesics, the arc-length form of the
//! conformal geodesic equations, and the Poisson structure on `(x, U, A)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{connection_jet, geometry_jet, GeometryJet, JetLevel, MetricSpec};
use crate::integrate::{integrate, Flow, Settings};
use crate::state::CurveState;
use crate::trajectory::{Metadata, Trajectory};

#[derive(Clone, Debug, PartialEq)]
pub struct KahlerStructure {
    /// `Ω_ab`
    pub omega: DMatrix<f64>,
    /// Charge `e` of the magnetic flow.
    pub charge: f64,
}

impl KahlerStructure {
    /// Validates `Ω` as a Kähler form for the Euclidean metric.
    pub fn new(omega: DMatrix<f64>, charge: f64) -> Result<Self> {
        let n = omega.nrows();
        if omega.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: omega.ncols() });
        }
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::OddDimension(n));
        }
        if (&omega + omega.transpose()).amax() > 1e-12 {
            return Err(Error::BadParams("Kähler form must be antisymmetric".into()));
        }
        if (&omega * &omega + DMatrix::identity(n, n)).amax() > 1e-10 {
            return Err(Error::BadParams("complex structure must square to -1".into()));
        }
        Ok(KahlerStructure { omega, charge })
    }

    /// `Ω = Σ dx^{2k-1} ∧ dx^{2k}`.
    pub fn standard(n: usize, charge: f64) -> Result<Self> {
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::OddDimension(n));
        }
        let mut omega = DMatrix::zeros(n, n);
        for k in (0..n).step_by(2) {
            omega[(k, k + 1)] = 1.0;
            omega[(k + 1, k)] = -1.0;
        }
        Self::new(omega, charge)
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    /// `J^a_b = g^ac Ω_cb`, acting on vectors.
    pub fn complex_structure(&self) -> DMatrix<f64> {
        self.omega.clone()
    }

    /// `Ω^ab` with `Ω_ab Ω^ac = δ_b^c`.
    pub fn omega_upper(&self) -> DMatrix<f64> {
        -self.omega.clone().try_inverse().expect("validated Kähler form is invertible")
    }

    /// Potential `φ_b = ½ x^c Ω_cb`, so that `∂_a φ_b − ∂_b φ_a = Ω_ab`.
    pub fn potential(&self, x: &DVector<f64>) -> DVector<f64> {
        self.omega.transpose() * x * 0.5
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: n });
        }
        Ok(())
    }
}

fn trajectory(dim: usize, fields: &[&str], equation: &str, times: &[f64], states: Vec<Vec<f64>>, settings: &Settings, stats: crate::integrate::Stats) -> Trajectory {
    Trajectory {
        dim,
        fields: fields.iter().map(|s| s.to_string()).collect(),
        times: times.to_vec(),
        states,
        meta: Metadata {
            metric: "flat-euclidean".into(),
            equation: equation.into(),
            method: settings.method.name().into(),
            atol: settings.atol,
            rtol: settings.rtol,
            stats,
        },
    }
}

/// `ẋ = U, U̇ = eJ(U)` on flat `ℝⁿ`. `y = (x, U)`.
pub fn magnetic_rhs(ks: &KahlerStructure, y: &[f64]) -> Result<Vec<f64>> {
    let n = ks.dim();
    if y.len() != 2 * n {
        return Err(Error::DimensionMismatch { expected: 2 * n, got: y.len() });
    }
    let u = DVector::from_column_slice(&y[n..]);
    let du = ks.complex_structure() * &u * ks.charge;
    Ok(y[n..].iter().chain(du.iter()).copied().collect())
}

pub struct MagneticFlow<'a>(pub &'a KahlerStructure);

impl Flow for MagneticFlow<'_> {
    fn len(&self) -> usize {
        2 * self.0.dim()
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        dy.copy_from_slice(&magnetic_rhs(self.0, y)?);
        Ok(())
    }
}

/// Magnetic trajectory recorded with fields `x, U, A`, where `A = eJ(U)`.
pub fn run_magnetic(ks: &KahlerStructure, x0: &[f64], u0: &[f64], times: &[f64], settings: &Settings) -> Result<Trajectory> {
    let n = ks.dim();
    ks.check(x0.len())?;
    ks.check(u0.len())?;
    let y0: Vec<f64> = x0.iter().chain(u0).copied().collect();
    let (ys, stats) = integrate(&MagneticFlow(ks), &y0, times, settings)?;
    let states = ys
        .into_iter()
        .map(|mut y| {
            let a = ks.complex_structure() * DVector::from_column_slice(&y[n..]) * ks.charge;
            y.extend(a.iter());
            y
        })
        .collect();
    Ok(trajectory(n, &["x", "U", "A"], "magnetic", times, states, settings, stats))
}

/// `∇_U A` for arc-length parametrised conformal geodesics:
/// `−(|A|² + P(U,U))U + P♯(U)`.
pub fn arclength_jerk(jet: &GeometryJet, s: &CurveState) -> Result<DVector<f64>> {
    let u2 = jet.norm2(&s.u);
    if u2.abs() < 1e-14 {
        return Err(Error::NullVelocity(u2));
    }
    Ok(jet.schouten_sharp_apply(&s.u) - &s.u * (jet.norm2(&s.a) + jet.schouten_form(&s.u, &s.u)))
}

/// Coordinate derivatives `(ẋ, U̇, Ȧ)` of the arc-length conformal geodesic system.
pub fn arclength_cg_rhs(jet: &GeometryJet, s: &CurveState) -> Result<Vec<f64>> {
    let j = arclength_jerk(jet, s)?;
    let du = &s.a - jet.gamma(&s.u, &s.u);
    let da = j - jet.gamma(&s.u, &s.a);
    Ok(s.u.iter().chain(du.iter()).chain(da.iter()).copied().collect())
}

/// Geometry for the arc-length system; flat planes are allowed since `P = 0` there.
pub fn arclength_jet(metric: &MetricSpec, x: &[f64]) -> Result<GeometryJet> {
    if metric.dim() < 3 && metric.is_flat() {
        connection_jet(metric, x)
    } else {
        geometry_jet(metric, x, JetLevel::Curvature)
    }
}

pub struct ArclengthFlow {
    pub metric: MetricSpec,
}

impl Flow for ArclengthFlow {
    fn len(&self) -> usize {
        3 * self.metric.dim()
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.metric.dim();
        let jet = arclength_jet(&self.metric, &y[..n])?;
        dy.copy_from_slice(&arclength_cg_rhs(&jet, &CurveState::from_flat(n, y)?)?);
        Ok(())
    }
}

pub fn run_arclength(metric: &MetricSpec, s0: &CurveState, times: &[f64], settings: &Settings) -> Result<Trajectory> {
    let n = metric.dim();
    if s0.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: s0.dim() });
    }
    let flow = ArclengthFlow { metric: metric.clone() };
    let y0: Vec<f64> = s0.x.iter().chain(s0.u.iter()).chain(s0.a.iter()).copied().collect();
    let (states, stats) = integrate(&flow, &y0, times, settings)?;
    let mut t = trajectory(n, &["x", "U", "A"], "arclength-cg", times, states, settings, stats);
    t.meta.metric = metric.name().into();
    Ok(t)
}

/// Residual of the arc-length equation along a magnetic trajectory, using `∇_U A = e²J²U`.
pub fn magnetic_arclength_residual(ks: &KahlerStructure, u: &DVector<f64>) -> f64 {
    let j = ks.complex_structure();
    let a = &j * u * ks.charge;
    let nabla_a = &j * &a * ks.charge;
    (nabla_a + u * a.norm_squared()).amax()
}

/// Poisson tensor on `(x, U, A)`: `{x,A} = −Ω^ab`, `{U,U} = Ω^ab`, `{A,A} = w²Ω^ab`.
pub fn structure_matrix(ks: &KahlerStructure, w: f64) -> DMatrix<f64> {
    let n = ks.dim();
    let up = ks.omega_upper();
    let mut m = DMatrix::zeros(3 * n, 3 * n);
    m.view_mut((0, 2 * n), (n, n)).copy_from(&(-&up));
    m.view_mut((2 * n, 0), (n, n)).copy_from(&up.transpose());
    m.view_mut((n, n), (n, n)).copy_from(&up);
    m.view_mut((2 * n, 2 * n), (n, n)).copy_from(&(&up * (w * w)));
    m
}

/// `{f, g}` from the gradients of `f` and `g` in `(x, U, A)`.
pub fn poisson_bracket(ks: &KahlerStructure, w: f64, df: &DVector<f64>, dg: &DVector<f64>) -> f64 {
    (df.transpose() * structure_matrix(ks, w) * dg)[(0, 0)]
}

/// Observable `½ zᵀMz + b·z + c` on `(x, U, A)`; closed under the bracket.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic {
    pub m: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: f64,
}

impl Quadratic {
    pub fn coordinate(len: usize, i: usize) -> Self {
        let mut b = DVector::zeros(len);
        b[i] = 1.0;
        Quadratic { m: DMatrix::zeros(len, len), b, c: 0.0 }
    }

    pub fn value(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.m * z)) + self.b.dot(z) + self.c
    }

    pub fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.m * z + &self.b
    }

    /// `{self, other}` for the constant Poisson tensor `pi`.
    pub fn bracket(&self, other: &Quadratic, pi: &DMatrix<f64>) -> Quadratic {
        let mpm = &self.m * pi * &other.m;
        Quadratic {
            m: &mpm + mpm.transpose(),
            b: &self.m * pi * &other.b - &other.m * pi * &self.b,
            c: self.b.dot(&(pi * &other.b)),
        }
    }
}

/// Largest cyclic sum `{f,{g,h}} + {g,{h,f}} + {h,{f,g}}` evaluated at `z`.
pub fn jacobi_defect(pi: &DMatrix<f64>, obs: &[Quadratic], z: &DVector<f64>) -> f64 {
    let mut worst = 0.0f64;
    for f in obs {
        for g in obs {
            for h in obs {
                let s = f.bracket(&g.bracket(h, pi), pi).value(z)
                    + g.bracket(&h.bracket(f, pi), pi).value(z)
                    + h.bracket(&f.bracket(g, pi), pi).value(z);
                worst = worst.max(s.abs());
            }
        }
    }
    worst
}

/// Jacobi identity over all coordinate triples of `(x, U, A)`.
pub fn jacobi_coordinate_triples(ks: &KahlerStructure, w: f64) -> f64 {
    let len = 3 * ks.dim();
    let coords: Vec<Quadratic> = (0..len).map(|i| Quadratic::coordinate(len, i)).collect();
    jacobi_defect(&structure_matrix(ks, w), &coords, &DVector::from_element(len, 1.0))
}

/// `H = Ω(A, U)` at `z = (x, U, A)`.
pub fn hamiltonian_au(ks: &KahlerStructure, z: &[f64]) -> f64 {
    let n = ks.dim();
    let u = DVector::from_column_slice(&z[n..2 * n]);
    let a = DVector::from_column_slice(&z[2 * n..3 * n]);
    a.dot(&(&ks.omega * u))
}

fn hamiltonian_au_gradient(ks: &KahlerStructure, z: &[f64]) -> DVector<f64> {
    let n = ks.dim();
    let u = DVector::from_column_slice(&z[n..2 * n]);
    let a = DVector::from_column_slice(&z[2 * n..3 * n]);
    let mut g = DVector::zeros(3 * n);
    g.rows_mut(n, n).copy_from(&(ks.omega.transpose() * a));
    g.rows_mut(2 * n, n).copy_from(&(&ks.omega * u));
    g
}

/// Hamilton's equations `ż = {z, H}` computed from the Poisson tensor.
pub fn hamilton_equations(ks: &KahlerStructure, w: f64, z: &[f64]) -> DVector<f64> {
    structure_matrix(ks, w) * hamiltonian_au_gradient(ks, z)
}

/// `ẋ = U, U̇ = A, Ȧ = −w²U`.
pub fn poisson_flow_rhs(ks: &KahlerStructure, w: f64, z: &[f64]) -> Result<Vec<f64>> {
    let n = ks.dim();
    if z.len() != 3 * n {
        return Err(Error::DimensionMismatch { expected: 3 * n, got: z.len() });
    }
    Ok(z[n..3 * n].iter().copied().chain(z[n..2 * n].iter().map(|u| -w * w * u)).collect())
}

pub struct PoissonFlow<'a> {
    pub ks: &'a KahlerStructure,
    pub w: f64,
}

impl Flow for PoissonFlow<'_> {
    fn len(&self) -> usize {
        3 * self.ks.dim()
    }
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        dy.copy_from_slice(&poisson_flow_rhs(self.ks, self.w, y)?);
        Ok(())
    }
}

pub fn run_poisson(ks: &KahlerStructure, w: f64, z0: &[f64], times: &[f64], settings: &Settings) -> Result<Trajectory> {
    let (states, stats) = integrate(&PoissonFlow { ks, w }, z0, times, settings)?;
    Ok(trajectory(ks.dim(), &["x", "U", "A"], "poisson", times, states, settings, stats))
}

#[derive(Clone, Debug, Serialize)]
pub struct DiracReport {
    /// `C_cd = {ψ_c, ψ_d}` for `ψ_a = R_a − ½Ω_ab U^b`.
    pub constraint_matrix: Vec<Vec<f64>>,
    /// `+1` if `C = Ω`, `−1` if `C = −Ω`, `0` otherwise.
    pub constraint_sign: f64,
    /// `max |{U^a,U^b}* − Ω^ab|`
    pub uu_residual: f64,
    /// `max |{x^a,P_b}* − δ^a_b|`
    pub xp_residual: f64,
    /// `max |{x^a,x^b}*|`
    pub xx_max: f64,
    /// Brackets pushed to `(x, U, A)` against the structure matrix.
    pub reduced_residual: f64,
    /// `{z, H}` from the bracket against the displayed flow, at a few states.
    pub flow_residual: f64,
}

impl DiracReport {
    pub fn max_residual(&self) -> f64 {
        self.uu_residual.max(self.xp_residual).max(self.xx_max).max(self.reduced_residual).max(self.flow_residual)
    }
}

/// Dirac reduction of the first-order constrained Lagrangian. Phase-space layout
/// `(x, P, U, R, λ, S)` with canonical brackets; the second-class constraints are
/// `P − λ`, `ψ = R − ½ΩU` and `S`.
pub fn dirac_bracket_check(ks: &KahlerStructure, w: f64) -> Result<DiracReport> {
    let n = ks.dim();
    let (x, p, u, r, l, s) = (0, n, 2 * n, 3 * n, 4 * n, 5 * n);
    let mut pi = DMatrix::zeros(6 * n, 6 * n);
    for a in 0..n {
        for (q, m) in [(x, p), (u, r), (l, s)] {
            pi[(q + a, m + a)] = 1.0;
            pi[(m + a, q + a)] = -1.0;
        }
    }
    let mut g = DMatrix::zeros(3 * n, 6 * n);
    for a in 0..n {
        g[(a, p + a)] = 1.0;
        g[(a, l + a)] = -1.0;
        g[(n + a, r + a)] = 1.0;
        for b in 0..n {
            g[(n + a, u + b)] = -0.5 * ks.omega[(a, b)];
        }
        g[(2 * n + a, s + a)] = 1.0;
    }
    let c = &g * &pi * g.transpose();
    let c_inv = c.clone().try_inverse().ok_or(Error::SingularLinearSystem)?;
    let dirac = &pi - &pi * g.transpose() * c_inv * &g * &pi;

    let psi = c.view((n, n), (n, n)).into_owned();
    let sign = if (&psi - &ks.omega).amax() < 1e-12 {
        1.0
    } else if (&psi + &ks.omega).amax() < 1e-12 {
        -1.0
    } else {
        0.0
    };
    let up = ks.omega_upper();
    let uu_residual = (dirac.view((u, u), (n, n)) - &up).amax();
    let xp_residual = (dirac.view((x, p), (n, n)) - DMatrix::<f64>::identity(n, n)).amax();
    let xx_max = dirac.view((x, x), (n, n)).amax();

    // z = (x, U, A) with A^a = Ω^ab (P_b − w²φ_b(x)).
    let mut map = DMatrix::zeros(3 * n, 6 * n);
    for a in 0..n {
        map[(a, x + a)] = 1.0;
        map[(n + a, u + a)] = 1.0;
    }
    map.view_mut((2 * n, p), (n, n)).copy_from(&up);
    let dphi = ks.omega.transpose() * 0.5;
    map.view_mut((2 * n, x), (n, n)).copy_from(&(&up * dphi * (-w * w)));
    let reduced = &map * dirac * map.transpose();
    let reduced_residual = (reduced - structure_matrix(ks, w)).amax();

    let mut flow_residual = 0.0f64;
    for k in 0..4 {
        let z: Vec<f64> = (0..3 * n).map(|i| ((i * 7 + k * 3) % 11) as f64 / 5.0 - 1.0).collect();
        let from_bracket = hamilton_equations(ks, w, &z);
        let displayed = DVector::from_vec(poisson_flow_rhs(ks, w, &z)?);
        flow_residual = flow_residual.max((from_bracket - displayed).amax());
    }

    Ok(DiracReport {
        constraint_matrix: psi.row_iter().map(|row| row.iter().copied().collect()).collect(),
        constraint_sign: sign,
        uu_residual,
        xp_residual,
        xx_max,
        reduced_residual,
        flow_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_structure() {
        let ks = KahlerStructure::standard(4, 1.0).unwrap();
        let j = ks.complex_structure();
        assert_eq!(&j * &j, -DMatrix::<f64>::identity(4, 4));
        let prod = ks.omega.transpose() * ks.omega_upper();
        assert!((prod - DMatrix::<f64>::identity(4, 4)).amax() < 1e-15);
        assert_eq!(KahlerStructure::standard(3, 1.0), Err(Error::OddDimension(3)));
    }

    #[test]
    fn potential_has_curl_omega() {
        let ks = KahlerStructure::standard(2, 1.0).unwrap();
        let at = |x: &[f64]| ks.potential(&DVector::from_column_slice(x));
        let d0 = at(&[1.0, 0.0]) - at(&[0.0, 0.0]);
        let d1 = at(&[0.0, 1.0]) - at(&[0.0, 0.0]);
        assert_eq!(d0[1] - d1[0], ks.omega[(0, 1)]);
    }

    #[test]
    fn displayed_brackets() {
        let ks = KahlerStructure::standard(2, 1.0).unwrap();
        let pi = structure_matrix(&ks, 2.0);
        let e = |i: usize| DVector::from_fn(6, |k, _| if k == i { 1.0 } else { 0.0 });
        for a in 0..2 {
            for b in 0..2 {
                assert_eq!(poisson_bracket(&ks, 2.0, &e(a), &e(2 + b)), 0.0);
            }
        }
        assert_eq!(poisson_bracket(&ks, 2.0, &e(0), &e(5)), -ks.omega_upper()[(0, 1)]);
        assert_eq!(pi[(0, 5)], -1.0);
        assert_eq!(pi[(4, 5)], 4.0 * ks.omega_upper()[(0, 1)]);
        assert_eq!(pi.transpose(), -pi);
    }

    #[test]
    fn magnetic_right_hand_side() {
        let ks = KahlerStructure::standard(2, 1.0).unwrap();
        let d = magnetic_rhs(&ks, &[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(d, vec![1.0, 0.0, 0.0, -1.0]);
    }
}
