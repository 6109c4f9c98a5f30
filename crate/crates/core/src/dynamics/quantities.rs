//! Pointwise conformally invariant quantities along a curve.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::GeometryJet;
use crate::state::CurveState;

/// Below this `|U|²` the conformal equations degenerate.
pub const NULL_SPEED2: f64 = 1e-10;

pub fn speed2(jet: &GeometryJet, u: &DVector<f64>) -> Result<f64> {
    let u2 = jet.norm2(u);
    if !u2.is_finite() || u2.abs() < NULL_SPEED2 {
        return Err(Error::NullVelocity(u2));
    }
    Ok(u2)
}

/// `E = J − 3⟨U,A⟩A/|U|² + (3|A|²/2|U|²)U − |U|²P♯U + 2P(U,U)U`.
pub fn e_vector(jet: &GeometryJet, s: &CurveState) -> Result<DVector<f64>> {
    let j = s.jerk()?;
    Ok(j + e_without_jerk(jet, s)?)
}

fn e_without_jerk(jet: &GeometryJet, s: &CurveState) -> Result<DVector<f64>> {
    let (u, a) = (&s.u, &s.a);
    let u2 = speed2(jet, u)?;
    let ua = jet.inner(u, a);
    let aa = jet.norm2(a);
    Ok(a * (-3.0 * ua / u2) + u * (1.5 * aa / u2 + 2.0 * jet.schouten_form(u, u))
        - jet.schouten_sharp_apply(u) * u2)
}

/// The jerk for which `E = 0`.
pub fn conformal_geodesic_jerk(jet: &GeometryJet, s: &CurveState) -> Result<DVector<f64>> {
    Ok(-e_without_jerk(jet, s)?)
}

/// `L = ⟨U,E⟩/|U|²`.
pub fn lagrangian(jet: &GeometryJet, s: &CurveState) -> Result<f64> {
    let e = e_vector(jet, s)?;
    Ok(jet.inner(&s.u, &e) / speed2(jet, &s.u)?)
}

/// `L₁ = ½|A|²/|U|² − ⟨U,A⟩²/|U|⁴ + P(U,U)`.
pub fn lagrangian_l1(jet: &GeometryJet, s: &CurveState) -> Result<f64> {
    let u2 = speed2(jet, &s.u)?;
    let ua = jet.inner(&s.u, &s.a);
    Ok(0.5 * jet.norm2(&s.a) / u2 - ua * ua / (u2 * u2) + jet.schouten_form(&s.u, &s.u))
}

/// `∇_U P` as a matrix.
fn nabla_u_schouten(jet: &GeometryJet, u: &DVector<f64>) -> Result<DMatrix<f64>> {
    let np = jet
        .nabla_schouten
        .as_ref()
        .ok_or_else(|| Error::Config("∇P needs JetLevel::Full".into()))?;
    let n = jet.dim;
    Ok(DMatrix::from_fn(n, n, |a, b| (0..n).map(|c| u[c] * np.at([c, a, b])).sum()))
}

/// Curvature vector `K` with `K_c = W_abcd A^a U^b U^d + |U|²(∇_c P_ab − ∇_a P_cb) U^a U^b`,
/// returned with the index raised. Satisfies `⟨K,U⟩ = 0`.
pub fn k_vector(jet: &GeometryJet, s: &CurveState) -> Result<DVector<f64>> {
    let np = jet
        .nabla_schouten
        .as_ref()
        .ok_or_else(|| Error::Config("K needs JetLevel::Full".into()))?;
    let (u, a) = (&s.u, &s.a);
    let n = jet.dim;
    let u2 = jet.norm2(u);
    let mut low = DVector::zeros(n);
    for c in 0..n {
        let mut w = 0.0;
        let mut dp = 0.0;
        for p in 0..n {
            for b in 0..n {
                let ub = u[b];
                if ub == 0.0 {
                    continue;
                }
                for d in 0..n {
                    w += jet.weyl.at([p, b, c, d]) * a[p] * ub * u[d];
                }
                dp += (np.at([c, p, b]) - np.at([p, c, b])) * u[p] * ub;
            }
        }
        low[c] = w + u2 * dp;
    }
    Ok(jet.raise(&low))
}

/// `M(V) = |U|⁻²(⟨A,V⟩U − ⟨U,V⟩A − ⟨A,U⟩V)`, so that `D(V) = ∇_U V + M(V)`.
fn d_zeroth(jet: &GeometryJet, s: &CurveState, v: &DVector<f64>) -> Result<DVector<f64>> {
    let u2 = speed2(jet, &s.u)?;
    let (u, a) = (&s.u, &s.a);
    Ok((u * jet.inner(a, v) - a * jet.inner(u, v) - v * jet.inner(a, u)) / u2)
}

/// `D(V) = ∇_U V + |U|⁻²(⟨A,V⟩U − ⟨U,V⟩A − ⟨A,U⟩V)`, given `dv = ∇_U V`.
pub fn d_op(jet: &GeometryJet, s: &CurveState, v: &DVector<f64>, dv: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(dv + d_zeroth(jet, s, v)?)
}

/// `D(D(V))`, given `dv = ∇_U V` and `ddv = ∇_U ∇_U V`. Needs the jerk.
pub fn d2_op(
    jet: &GeometryJet,
    s: &CurveState,
    v: &DVector<f64>,
    dv: &DVector<f64>,
    ddv: &DVector<f64>,
) -> Result<DVector<f64>> {
    let (u, a) = (&s.u, &s.a);
    let j = s.jerk()?;
    let u2 = speed2(jet, u)?;
    let ua = jet.inner(u, a);
    let du2 = 2.0 * ua;
    let dua = jet.norm2(a) + jet.inner(u, j);
    let av = jet.inner(a, v);
    let uv = jet.inner(u, v);
    let dav = jet.inner(j, v) + jet.inner(a, dv);
    let duv = jet.inner(a, v) + jet.inner(u, dv);
    let m = (u * av - a * uv - v * ua) / u2;
    let dm = (a * av + u * dav - j * uv - a * duv - dv * ua - v * dua) / u2 - &m * (du2 / u2);
    let d1 = dv + &m;
    let dd1 = ddv + dm;
    Ok(&dd1 + d_zeroth(jet, s, &d1)?)
}

/// `D*(Y) = −∇_U Y + |U|⁻²(⟨U,Y⟩A − ⟨A,Y⟩U − ⟨A,U⟩Y)`, given `dy = ∇_U Y`.
pub fn d_adjoint(jet: &GeometryJet, s: &CurveState, y: &DVector<f64>, dy: &DVector<f64>) -> Result<DVector<f64>> {
    let u2 = speed2(jet, &s.u)?;
    let (u, a) = (&s.u, &s.a);
    Ok(-dy + (a * jet.inner(u, y) - u * jet.inner(a, y) - y * jet.inner(a, u)) / u2)
}

/// `F = (E − 2LU)/|U|²`.
pub fn f_vector(jet: &GeometryJet, s: &CurveState) -> Result<DVector<f64>> {
    let u2 = speed2(jet, &s.u)?;
    let e = e_vector(jet, s)?;
    let l = jet.inner(&s.u, &e) / u2;
    Ok((e - &s.u * (2.0 * l)) / u2)
}

/// Boundary functional `B(V) = |U|⁻²(⟨U, D²V⟩ − ⟨E − 2LU, V⟩)`.
pub fn b_term(
    jet: &GeometryJet,
    s: &CurveState,
    v: &DVector<f64>,
    dv: &DVector<f64>,
    ddv: &DVector<f64>,
) -> Result<f64> {
    let u2 = speed2(jet, &s.u)?;
    let d2 = d2_op(jet, s, v, dv, ddv)?;
    let f = f_vector(jet, s)?;
    Ok(jet.inner(&s.u, &d2) / u2 - jet.inner(&f, v))
}

/// `(F, ∇_U F)` along a curve whose fourth covariant derivative is `snap`.
pub fn f_with_derivative(
    jet: &GeometryJet,
    s: &CurveState,
    snap: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let (u, a) = (&s.u, &s.a);
    let j = s.jerk()?;
    let u2 = speed2(jet, u)?;
    let ua = jet.inner(u, a);
    let aa = jet.norm2(a);
    let du2 = 2.0 * ua;
    let dua = aa + jet.inner(u, j);
    let daa = 2.0 * jet.inner(a, j);

    let pu = jet.schouten_sharp_apply(u);
    let puu = jet.schouten_form(u, u);
    let nup = nabla_u_schouten(jet, u)?;
    let dpu = &jet.g_inv * (&nup * u) + jet.schouten_sharp_apply(a);
    let dpuu = (u.transpose() * &nup * u)[(0, 0)] + 2.0 * jet.schouten_form(u, a);

    let c_a = -3.0 * ua / u2;
    let dc_a = -3.0 * (dua / u2 - ua * du2 / (u2 * u2));
    let c_u = 1.5 * aa / u2 + 2.0 * puu;
    let dc_u = 1.5 * (daa / u2 - aa * du2 / (u2 * u2)) + 2.0 * dpuu;

    let e = j + a * c_a + u * c_u - &pu * u2;
    let de = snap + a * dc_a + j * c_a + u * dc_u + a * c_u - &pu * du2 - dpu * u2;

    let ue = jet.inner(u, &e);
    let l = ue / u2;
    let dl = (jet.inner(a, &e) + jet.inner(u, &de)) / u2 - ue * du2 / (u2 * u2);

    let num = &e - u * (2.0 * l);
    let dnum = &de - u * (2.0 * dl) - a * (2.0 * l);
    let f = &num / u2;
    let df = dnum / u2 - &num * (du2 / (u2 * u2));
    Ok((f, df))
}

/// `D*(F) − K/|U|²` for a 4-jet `(state, snap)`; zero on conformal Mercator curves.
pub fn mercator_residual(jet: &GeometryJet, s: &CurveState, snap: &DVector<f64>) -> Result<DVector<f64>> {
    let u2 = speed2(jet, &s.u)?;
    let (f, df) = f_with_derivative(jet, s, snap)?;
    let k = if jet.weyl.max_abs() == 0.0 && jet.nabla_schouten.as_ref().is_some_and(|t| t.max_abs() == 0.0) {
        DVector::zeros(jet.dim)
    } else {
        k_vector(jet, s)?
    };
    Ok(d_adjoint(jet, s, &f, &df)? - k / u2)
}

/// The snap `∇_U J` solving the conformal Mercator equation.
///
/// The residual is affine in the snap with linear part `−R/|U|²`, where
/// `R = Id − 2U⟨U,·⟩/|U|²` is a reflection, so the solve is explicit.
pub fn mercator_snap(jet: &GeometryJet, s: &CurveState) -> Result<DVector<f64>> {
    let u2 = speed2(jet, &s.u)?;
    let zero = DVector::zeros(jet.dim);
    let r0 = mercator_residual(jet, s, &zero)?;
    let reflect = |w: &DVector<f64>| w - &s.u * (2.0 * jet.inner(&s.u, w) / u2);
    let snap = reflect(&r0) * u2;
    if !snap.iter().all(|v| v.is_finite()) {
        return Err(Error::SingularLinearSystem);
    }
    Ok(snap)
}

/// Flat-space first integral of the fourth-order flow,
/// `C = |U|⁻²(J − |A|²U/|U|² − 2⟨A,U⟩A/|U|² + 4⟨A,U⟩²U/|U|⁴ − 2⟨J,U⟩U/|U|²)`.
pub fn mercator_c(jet: &GeometryJet, s: &CurveState) -> Result<DVector<f64>> {
    let (u, a) = (&s.u, &s.a);
    let j = s.jerk()?;
    let u2 = speed2(jet, u)?;
    let ua = jet.inner(u, a);
    let aa = jet.norm2(a);
    let ju = jet.inner(j, u);
    Ok((j - u * (aa / u2) - a * (2.0 * ua / u2) + u * (4.0 * ua * ua / (u2 * u2)) - u * (2.0 * ju / u2)) / u2)
}

/// Jerk of the flat fourth-order flow with first integral `C`:
/// `J = −|A|²U/|U|² + 2⟨A,U⟩A/|U|² − 2⟨C,U⟩U + |U|²C`.
pub fn flat_jerk_from_c(jet: &GeometryJet, s: &CurveState, c: &DVector<f64>) -> Result<DVector<f64>> {
    let (u, a) = (&s.u, &s.a);
    let u2 = speed2(jet, u)?;
    let ua = jet.inner(u, a);
    let aa = jet.norm2(a);
    Ok(u * (-aa / u2) + a * (2.0 * ua / u2) - u * (2.0 * jet.inner(c, u)) + c * u2)
}
