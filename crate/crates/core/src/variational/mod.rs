//! The functional `I[γ] = ∫ L dt`, its first variation, and the two-point
//! boundary value problem for the fourth-order equation.

mod bvp;
mod curves;

pub use bvp::{bvp_shoot, BvpProblem, BvpSettings, BvpSolution, TraceRow};
pub use curves::{CurveSource, SeriesCurve, VariationField};

use nalgebra::DVector;
use serde::Serialize;

use crate::dynamics::{b_term, d_op, f_vector, k_vector, lagrangian, speed2};
use crate::error::{Error, Result};
use crate::geometry::{geometry_jet, lift, GeometryJet, JetLevel, MetricSpec};
use crate::integrate::linspace;
use crate::state::CurveState;
use crate::trajectory::Trajectory;

pub const DEFAULT_SAMPLES: usize = 2001;
/// Default `s` step for finite-difference variations.
pub const DEFAULT_VARIATION_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quadrature {
    pub value: f64,
    /// `|S_h − S_2h| / 15`.
    pub error_estimate: f64,
}

/// Composite Simpson on an odd number of equally spaced values.
pub fn simpson(values: &[f64], h: f64) -> Result<Quadrature> {
    let m = values.len();
    if m < 5 || m % 2 == 0 {
        return Err(Error::BadParams(format!("Simpson needs an odd number (≥ 5) of samples, got {m}")));
    }
    let rule = |vals: &[f64], h: f64| {
        let k = vals.len() - 1;
        let mut s = vals[0] + vals[k];
        for (i, v) in vals.iter().enumerate().take(k).skip(1) {
            s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        s * h / 3.0
    };
    let fine = rule(values, h);
    let err = if (m - 1) % 4 == 0 {
        let coarse: Vec<f64> = values.iter().step_by(2).copied().collect();
        (fine - rule(&coarse, 2.0 * h)).abs() / 15.0
    } else {
        f64::NAN
    };
    Ok(Quadrature { value: fine, error_estimate: err })
}

/// Covariant 3-jet (and the jet it was computed with) of a curve at `t`.
fn curve_state(metric: &MetricSpec, curve: &dyn CurveSource, t: f64, level: JetLevel) -> Result<(GeometryJet, CurveState)> {
    let d = curve.derivatives(t)?;
    let jet = geometry_jet(metric, d[0].as_slice(), level)?;
    let cov = lift::covariant_from_coordinates(&jet, &d[1..4])?;
    let s = CurveState::with_jerk(d[0].clone(), cov[0].clone(), cov[1].clone(), cov[2].clone());
    Ok((jet, s))
}

fn check_interval(t0: f64, t1: f64) -> Result<()> {
    if !(t1 > t0) {
        return Err(Error::BadParams(format!("need t0 < t1, got [{t0}, {t1}]")));
    }
    Ok(())
}

/// `I[γ]` over `[t0, t1]` by Simpson on `samples` points.
pub fn functional_i(metric: &MetricSpec, curve: &dyn CurveSource, t0: f64, t1: f64, samples: usize) -> Result<Quadrature> {
    check_interval(t0, t1)?;
    let ts = linspace(t0, t1, samples);
    let vals = ts
        .iter()
        .map(|&t| {
            let (jet, s) = curve_state(metric, curve, t, JetLevel::Curvature)?;
            lagrangian(&jet, &s)
        })
        .collect::<Result<Vec<f64>>>()?;
    simpson(&vals, (t1 - t0) / (samples - 1) as f64)
}

/// `I[γ]` from a sampled trajectory whose samples carry the jerk (or, for
/// conformal geodesic runs, `L = 0` is recomputed from the stored 2-jets).
pub fn functional_i_trajectory(metric: &MetricSpec, traj: &Trajectory) -> Result<Quadrature> {
    let m = traj.len();
    if m < 5 {
        return Err(Error::BadParams("trajectory too short for Simpson".into()));
    }
    let h = traj.times[1] - traj.times[0];
    if traj.times.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1.0)) {
        return Err(Error::BadParams("Simpson needs equally spaced samples".into()));
    }
    let vals = (0..m)
        .map(|i| {
            let mut s = traj.curve_state(i)?;
            let jet = geometry_jet(metric, s.x.as_slice(), JetLevel::Curvature)?;
            if s.j.is_none() && traj.meta.equation == "cg3" {
                s.j = Some(crate::dynamics::conformal_geodesic_jerk(&jet, &s)?);
            }
            lagrangian(&jet, &s)
        })
        .collect::<Result<Vec<f64>>>()?;
    simpson(&vals, h)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FirstVariation {
    /// `∫ |U|⁻²(⟨K,V⟩ − ⟨E − 2LU, D(V)⟩) dt`
    pub integral: f64,
    /// `B(V)(t1) − B(V)(t0)`
    pub boundary: f64,
    /// `∫ |U|⁻²⟨K,V⟩ dt` alone.
    pub k_integral: f64,
    pub quadrature_error: f64,
}

impl FirstVariation {
    pub fn total(&self) -> f64 {
        self.integral + self.boundary
    }
}

/// Covariant `[V, ∇V, ∇²V]` along the curve.
fn variation_jet(jet: &GeometryJet, curve_d: &[DVector<f64>], v: &dyn CurveSource, t: f64) -> Result<Vec<DVector<f64>>> {
    let vd = v.derivatives(t)?;
    let gs = lift::christoffel_along(jet, &curve_d[1..], 1)?;
    let mut cov = lift::covariant_derivatives(&gs, &curve_d[1..], &vd[..3]);
    cov.truncate(3);
    Ok(cov)
}

/// Integral and boundary terms of the first-variation formula.
pub fn first_variation_formula(
    metric: &MetricSpec,
    curve: &dyn CurveSource,
    v: &dyn CurveSource,
    t0: f64,
    t1: f64,
    samples: usize,
) -> Result<FirstVariation> {
    check_interval(t0, t1)?;
    let ts = linspace(t0, t1, samples);
    let flat = metric.is_flat();
    let level = if flat { JetLevel::Curvature } else { JetLevel::Full };
    let mut full = Vec::with_capacity(samples);
    let mut konly = Vec::with_capacity(samples);
    let b_at = |t: f64| -> Result<f64> {
        let d = curve.derivatives(t)?;
        let (jet, s) = curve_state(metric, curve, t, level)?;
        let vj = variation_jet(&jet, &d, v, t)?;
        b_term(&jet, &s, &vj[0], &vj[1], &vj[2])
    };
    let boundary = b_at(t1)? - b_at(t0)?;
    for &t in &ts {
        let d = curve.derivatives(t)?;
        let (jet, s) = curve_state(metric, curve, t, level)?;
        let vj = variation_jet(&jet, &d, v, t)?;
        let u2 = speed2(&jet, &s.u)?;
        let kv = if flat { 0.0 } else { jet.inner(&k_vector(&jet, &s)?, &vj[0]) / u2 };
        let f = f_vector(&jet, &s)?;
        let dv = d_op(&jet, &s, &vj[0], &vj[1])?;
        full.push(kv - jet.inner(&f, &dv));
        konly.push(kv);
    }
    let h = (t1 - t0) / (samples - 1) as f64;
    let q = simpson(&full, h)?;
    Ok(FirstVariation {
        integral: q.value,
        boundary,
        k_integral: simpson(&konly, h)?.value,
        quadrature_error: q.error_estimate,
    })
}

struct Perturbed<'a> {
    base: &'a dyn CurveSource,
    v: &'a dyn CurveSource,
    s: f64,
}

impl CurveSource for Perturbed<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn derivatives(&self, t: f64) -> Result<Vec<DVector<f64>>> {
        let b = self.base.derivatives(t)?;
        let v = self.v.derivatives(t)?;
        Ok(b.iter().zip(&v).map(|(x, y)| x + y * self.s).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FdVariation {
    /// Richardson-extrapolated derivative.
    pub value: f64,
    /// Plain central differences at `s` and `s/2`.
    pub central_s: f64,
    pub central_half: f64,
}

/// `d/ds I[X + sV]` at `s = 0` by central differences at `s` and `s/2`,
/// combined by Richardson extrapolation.
pub fn first_variation_fd(
    metric: &MetricSpec,
    curve: &dyn CurveSource,
    v: &dyn CurveSource,
    t0: f64,
    t1: f64,
    samples: usize,
    s: f64,
) -> Result<FdVariation> {
    let i_at = |s: f64| functional_i(metric, &Perturbed { base: curve, v, s }, t0, t1, samples).map(|q| q.value);
    let central = |s: f64| -> Result<f64> { Ok((i_at(s)? - i_at(-s)?) / (2.0 * s)) };
    let d1 = central(s)?;
    let d2 = central(0.5 * s)?;
    Ok(FdVariation { value: (4.0 * d2 - d1) / 3.0, central_s: d1, central_half: d2 })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PanelEntry {
    pub label: String,
    /// `B(V)|` (zero for compactly supported variations).
    pub boundary: f64,
    pub delta_i: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationarityReport {
    pub stationary: bool,
    pub tolerance: f64,
    pub max_abs_delta: f64,
    pub panel: Vec<PanelEntry>,
}

/// Variations from the admissible class: compactly supported bumps (for which the
/// boundary term vanishes) and pairs of polynomial fields combined so that the
/// boundary term cancels. Only meaningful where the curvature integral vanishes,
/// i.e. on conformally flat metrics.
pub fn stationarity_panel(metric: &MetricSpec, curve: &dyn CurveSource, t0: f64, t1: f64) -> Result<Vec<(String, VariationField)>> {
    let n = curve.dim();
    let len = t1 - t0;
    let mut panel = Vec::new();
    // bump endpoints on the default grid
    let node = |f: f64| t0 + ((f * (DEFAULT_SAMPLES - 1) as f64).round() / (DEFAULT_SAMPLES - 1) as f64) * len;
    for (fa, fb) in [(0.1, 0.5), (0.3, 0.8), (0.55, 0.95)] {
        for k in 0..n {
            let mut dir = vec![0.0; n];
            dir[k] = 1.0;
            let (a, b) = (node(fa), node(fb));
            panel.push((format!("bump[{a:.3},{b:.3}]e{}", k + 1), VariationField::bump(a, b, dir)));
        }
    }
    let mid = 0.5 * (t0 + t1);
    let mut polys = Vec::new();
    for deg in 0..3usize {
        for k in 0..n {
            let mut coeffs = vec![vec![0.0; n]; deg + 1];
            coeffs[deg][k] = 1.0;
            polys.push((format!("(t-m)^{deg}e{}", k + 1), VariationField::polynomial(mid, coeffs)));
        }
    }
    let b_of = |v: &VariationField| -> Result<f64> {
        let r = first_variation_formula(metric, curve, v, t0, t1, 5)?;
        Ok(r.boundary)
    };
    let bs = polys.iter().map(|(_, p)| b_of(p)).collect::<Result<Vec<f64>>>()?;
    // pair each field with the one after it that has the largest boundary term
    for i in 0..polys.len() {
        let (j, bj) = bs
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(j, b)| (j, *b))
            .unwrap();
        if bj.abs() < 1e-12 {
            continue;
        }
        let c = bs[i] / bj;
        let label = format!("{} - {c:.4}*{}", polys[i].0, polys[j].0);
        panel.push((label, VariationField::combination(vec![(1.0, polys[i].1.clone()), (-c, polys[j].1.clone())])));
    }
    Ok(panel)
}

pub fn stationarity_check(
    metric: &MetricSpec,
    curve: &dyn CurveSource,
    t0: f64,
    t1: f64,
    tolerance: f64,
) -> Result<StationarityReport> {
    check_interval(t0, t1)?;
    let panel = stationarity_panel(metric, curve, t0, t1)?;
    let mut entries = Vec::new();
    let mut worst: f64 = 0.0;
    for (label, v) in panel {
        let boundary = first_variation_formula(metric, curve, &v, t0, t1, 5)?.boundary;
        let d = first_variation_fd(metric, curve, &v, t0, t1, DEFAULT_SAMPLES, DEFAULT_VARIATION_STEP)?.value;
        worst = worst.max(d.abs());
        entries.push(PanelEntry { label, boundary, delta_i: d });
    }
    Ok(StationarityReport { stationary: worst <= tolerance, tolerance, max_abs_delta: worst, panel: entries })
}
