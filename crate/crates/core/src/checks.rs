//! Named verification suites with pass/fail reports, plus the three Figure 1 runs.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{
    b_term, conformal_geodesic_jerk, d_op, e_vector, flat_jerk_from_c, k_vector, lagrangian, mercator_c, CurveFlow,
};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{geometry_jet, lift, ConformalFactor, GeometryJet, JetLevel, MetricSpec};
use crate::hamiltonian::*;
use crate::integrate::{linspace, Settings};
use crate::io::RunConfig;
use crate::oracles::{CircleParams, OracleCurve, SpiralParams};
use crate::series::{Series, SeriesPoint};
use crate::state::CurveState;
use crate::tractor::{
    acceleration_derivative_along, acceleration_tractor, free_particle_report, tractor_kinetic_energy, tractor_norm,
};
use crate::trajectory::Trajectory;
use crate::variational::{
    first_variation_fd, first_variation_formula, CurveSource, SeriesCurve, VariationField, DEFAULT_SAMPLES,
    DEFAULT_VARIATION_STEP,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `"<="` or `">="`.
    pub comparison: &'static str,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl SuiteReport {
    pub fn new(suite: &str) -> Self {
        SuiteReport { suite: suite.to_string(), passed: true, checks: Vec::new(), notes: Vec::new() }
    }

    fn push(&mut self, name: &str, value: f64, comparison: &'static str, tolerance: f64) {
        let passed = match comparison {
            "<=" => value <= tolerance,
            _ => value >= tolerance,
        };
        self.passed &= passed;
        self.checks.push(Check { name: name.to_string(), value, comparison, tolerance, passed });
    }

    pub fn at_most(&mut self, name: &str, value: f64, tolerance: f64) {
        self.push(name, value, "<=", tolerance);
    }

    pub fn at_least(&mut self, name: &str, value: f64, tolerance: f64) {
        self.push(name, value, ">=", tolerance);
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Invariance,
    FirstIntegrals,
    Tractor,
    Theorem1,
    Hamiltonian,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "invariance" => Suite::Invariance,
            "first-integrals" => Suite::FirstIntegrals,
            "tractor" => Suite::Tractor,
            "theorem1" => Suite::Theorem1,
            "hamiltonian" => Suite::Hamiltonian,
            _ => {
                return Err(Error::Config(format!(
                    "unknown suite {s:?} (expected invariance, first-integrals, tractor, theorem1 or hamiltonian)"
                )))
            }
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct SuiteOptions {
    /// Base metric for the invariance suite.
    pub metric: Option<MetricSpec>,
    /// Fixed conformal factor for the invariance suite (a random exponential factor is always added).
    pub factor: Option<ConformalFactor>,
    /// A run whose trajectory is checked as well (first-integrals, tractor).
    pub run: Option<RunConfig>,
    pub states: Option<usize>,
    pub seed: u64,
}

pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> Result<SuiteReport> {
    match suite {
        Suite::Invariance => invariance_suite(opts),
        Suite::FirstIntegrals => first_integrals_suite(opts),
        Suite::Tractor => tractor_suite(opts),
        Suite::Theorem1 => theorem1_suite(),
        Suite::Hamiltonian => hamiltonian_suite(),
    }
}

/// A diagonal 4-metric with non-zero Weyl curvature.
pub fn warped4() -> MetricSpec {
    let e = |s: &str| Expr::parse(s).expect("valid");
    MetricSpec::diagonal(
        "warped4",
        vec![e("1 + 0.2*x2^2"), e("exp(0.3*x1 - 0.1*x4)"), e("1 + 0.1*sin(x1*x2)"), e("2 + cos(x3)")],
        vec![1.0; 4],
    )
    .expect("valid metric")
}

fn warped3() -> MetricSpec {
    let e = |s: &str| Expr::parse(s).expect("valid");
    MetricSpec::diagonal("warped3", vec![e("1 + 0.3*x2^2"), e("exp(0.4*x1 - 0.2*x3)"), e("1 + 0.3*sin(x1*x2)")], vec![1.0; 3])
        .expect("valid metric")
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, r: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-r..r))
}

struct Invariants {
    e: DVector<f64>,
    l: f64,
    dv: DVector<f64>,
    b: f64,
    kv: f64,
}

fn invariants(jet: &GeometryJet, xd: &[DVector<f64>], vd: &[DVector<f64>]) -> Result<Invariants> {
    let cov = lift::covariant_from_coordinates(jet, &xd[1..4])?;
    let gs = lift::christoffel_along(jet, &xd[1..], 1)?;
    let vc = lift::covariant_derivatives(&gs, &xd[1..], vd);
    let s = CurveState::with_jerk(xd[0].clone(), cov[0].clone(), cov[1].clone(), cov[2].clone());
    let u2 = jet.norm2(&s.u);
    Ok(Invariants {
        e: e_vector(jet, &s)?,
        l: lagrangian(jet, &s)?,
        dv: d_op(jet, &s, &vc[0], &vc[1])?,
        b: b_term(jet, &s, &vc[0], &vc[1], &vc[2])?,
        kv: jet.inner(&k_vector(jet, &s)?, &vc[0]) / u2,
    })
}

/// `E, L, D(V), B(V)` and `|U|⁻²⟨K,V⟩` for `g` and `Ω²g` at random states.
fn invariance_suite(opts: &SuiteOptions) -> Result<SuiteReport> {
    let base = opts.metric.clone().unwrap_or_else(warped4);
    let n = base.dim();
    let fixed = opts.factor.clone().unwrap_or_else(ConformalFactor::stereographic);
    let states = opts.states.unwrap_or(128);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = [0.0f64; 5];
    let mut compared = 0usize;
    let mut attempts = 0usize;
    while compared < states {
        attempts += 1;
        if attempts > 20 * states {
            return Err(Error::BadParams("metric rejects too many random states".into()));
        }
        let x = random_vec(&mut rng, n, 0.6);
        let mut xd = vec![x.clone()];
        for _ in 0..4 {
            xd.push(random_vec(&mut rng, n, 1.0));
        }
        xd[1][0] += 1.5;
        let vd: Vec<DVector<f64>> = (0..3).map(|_| random_vec(&mut rng, n, 1.0)).collect();
        let k: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let Ok(g) = geometry_jet(&base, x.as_slice(), JetLevel::Full) else { continue };
        let Ok(q) = invariants(&g, &xd, &vd) else { continue };
        for factor in [fixed.clone(), ConformalFactor::exponential(&k)] {
            let gh = geometry_jet(&base.rescale(&factor), x.as_slice(), JetLevel::Full)?;
            let qh = invariants(&gh, &xd, &vd)?;
            let rel = |a: f64, b: f64, scale: f64| (a - b).abs() / (1.0 + scale.abs());
            worst[0] = worst[0].max((&q.e - &qh.e).amax() / (1.0 + q.e.amax()));
            worst[1] = worst[1].max(rel(q.l, qh.l, q.l));
            worst[2] = worst[2].max((&q.dv - &qh.dv).amax() / (1.0 + q.dv.amax()));
            worst[3] = worst[3].max(rel(q.b, qh.b, q.b));
            worst[4] = worst[4].max(rel(q.kv, qh.kv, q.kv));
        }
        compared += 1;
    }
    let mut r = SuiteReport::new("invariance");
    r.notes.push(format!("base metric {}, fixed factor {}, plus a random exponential factor per state", base.name(), fixed.omega));
    r.at_least("states", compared as f64, 100.0_f64.min(states as f64));
    for (name, w) in ["E", "L", "D(V)", "B(V)", "K.V/|U|^2"].iter().zip(worst) {
        r.at_most(&format!("max relative difference of {name}"), w, 1e-7);
    }
    Ok(r)
}

/// Largest `|C(t) − C(0)|` along a flat trajectory; conformal geodesic runs get `J` from the flow.
pub fn c_drift(traj: &Trajectory, metric: &MetricSpec) -> Result<f64> {
    if !metric.is_flat() {
        return Err(Error::NotFlat);
    }
    let mut c0: Option<DVector<f64>> = None;
    let mut worst = 0.0f64;
    for i in 0..traj.len() {
        let mut s = traj.curve_state(i)?;
        let jet = geometry_jet(metric, s.x.as_slice(), JetLevel::Curvature)?;
        if s.j.is_none() {
            s.j = Some(conformal_geodesic_jerk(&jet, &s)?);
        }
        let c = mercator_c(&jet, &s)?;
        match &c0 {
            None => c0 = Some(c),
            Some(c0) => worst = worst.max((c - c0).amax()),
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct Figure1Run {
    pub label: &'static str,
    pub colour: &'static str,
    pub c: Vec<f64>,
    pub c_drift: f64,
    /// Largest distance from the osculating plane at `t = 0`.
    pub plane_deviation: f64,
    /// Largest distance from the circle through three samples.
    pub circle_deviation: f64,
    pub max_abs_torsion: f64,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

pub const FIGURE1_X: [f64; 3] = [0.0, 0.0, 0.0];
pub const FIGURE1_U: [f64; 3] = [1.0, 0.0, 0.0];
pub const FIGURE1_A: [f64; 3] = [0.1, 1.0, 0.0];

fn circle_through(p: &DVector<f64>, q: &DVector<f64>, r: &DVector<f64>) -> Option<(DVector<f64>, f64, DVector<f64>)> {
    let a = q - p;
    let b = r - p;
    let normal = a.cross(&b);
    let nn = normal.norm_squared();
    if nn < 1e-24 {
        return None;
    }
    let centre = p + (b.norm_squared() * normal.cross(&a) + a.norm_squared() * b.cross(&normal)) / (2.0 * nn);
    let radius = (p - &centre).norm();
    Some((centre, radius, normal / nn.sqrt()))
}

/// Serret–Frenet torsion `det(x', x'', x''') / |x' × x''|²` of a flat space curve.
pub fn torsion(u: &DVector<f64>, a: &DVector<f64>, j: &DVector<f64>) -> f64 {
    let cross = u.cross(a);
    cross.dot(j) / cross.norm_squared()
}

/// The three integral curves of the flat fourth-order equation through
/// `X = 0, U = e₁, A = (0.1, 1, 0)`: conformal geodesic jerk, `C = 0`, and `C = (0, 0, 1)`.
pub fn figure1(t1: f64, samples: usize, settings: &Settings) -> Result<Vec<Figure1Run>> {
    let m = MetricSpec::euclidean(3);
    let v = |x: &[f64]| DVector::from_column_slice(x);
    let s = CurveState::new(v(&FIGURE1_X), v(&FIGURE1_U), v(&FIGURE1_A));
    let jet = geometry_jet(&m, &FIGURE1_X, JetLevel::Curvature)?;
    let circle_jerk = conformal_geodesic_jerk(&jet, &s)?;
    let c_circle = mercator_c(&jet, &CurveState { j: Some(circle_jerk), ..s.clone() })?;
    let runs = [
        ("conformal geodesic", "red", c_circle),
        ("logarithmic spiral", "blue", DVector::zeros(3)),
        ("generic, non-zero torsion", "green", v(&[0.0, 0.0, 1.0])),
    ];
    let times = linspace(0.0, t1, samples);
    let normal = v(&FIGURE1_U).cross(&v(&FIGURE1_A)).normalize();
    let mut out = Vec::new();
    for (label, colour, c) in runs {
        let s0 = CurveState { j: Some(flat_jerk_from_c(&jet, &s, &c)?), ..s.clone() };
        let traj = CurveFlow::mercator(m.clone()).run(&s0, &times, settings)?;
        let pts: Vec<DVector<f64>> = (0..traj.len()).map(|i| traj.position(i)).collect();
        let plane_deviation = pts.iter().map(|p| p.dot(&normal).abs()).fold(0.0, f64::max);
        let k = pts.len() / 3;
        let circle_deviation = match circle_through(&pts[0], &pts[k], &pts[2 * k]) {
            Some((centre, radius, nrm)) => pts
                .iter()
                .map(|p| {
                    let d = p - &centre;
                    let off = d.dot(&nrm);
                    ((&d - &nrm * off).norm() - radius).hypot(off)
                })
                .fold(0.0, f64::max),
            None => f64::INFINITY,
        };
        let mut max_abs_torsion = 0.0f64;
        for i in 0..traj.len() {
            let st = traj.curve_state(i)?;
            max_abs_torsion = max_abs_torsion.max(torsion(&st.u, &st.a, st.jerk()?).abs());
        }
        out.push(Figure1Run {
            label,
            colour,
            c: c.as_slice().to_vec(),
            c_drift: c_drift(&traj, &m)?,
            plane_deviation,
            circle_deviation,
            max_abs_torsion,
            trajectory: traj,
        });
    }
    Ok(out)
}

/// Default Figure 1 span and sampling.
pub fn figure1_default() -> Result<Vec<Figure1Run>> {
    figure1(2.0, 201, &Settings::rkf45(1e-11))
}

fn first_integrals_suite(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut r = SuiteReport::new("first-integrals");
    if let Some(cfg) = &opts.run {
        if !matches!(cfg.equation.as_str(), "cg3" | "mercator4") {
            return Err(Error::Config("first-integrals needs a cg3 or mercator4 run".into()));
        }
        let metric = cfg.metric.build()?;
        let traj = cfg.run()?;
        r.notes.push(format!("run {} on {}", cfg.equation, metric.name()));
        r.at_most("C drift along the configured run", c_drift(&traj, &metric)?, 1e-6);
        return Ok(r);
    }
    for run in figure1_default()? {
        r.at_most(&format!("C drift, {} ({})", run.label, run.colour), run.c_drift, 1e-6);
    }
    Ok(r)
}

fn random_circle(rng: &mut ChaCha8Rng) -> Result<OracleCurve> {
    let x0 = random_vec(rng, 3, 0.5);
    let u = random_vec(rng, 3, 1.0).normalize();
    let w = random_vec(rng, 3, 1.0);
    let a = (&w - &u * u.dot(&w)) * rng.gen_range(0.3..2.0);
    Ok(OracleCurve::Circle(CircleParams::new(x0.as_slice(), u.as_slice(), a.as_slice())?))
}

type Sampler<'a> = Box<dyn Fn(f64) -> Result<(GeometryJet, CurveState)> + 'a>;

fn oracle_sampler<'a>(m: &'a MetricSpec, c: &'a OracleCurve) -> Sampler<'a> {
    Box::new(move |t| {
        let x = c.point(t)?;
        let jet = geometry_jet(m, x.as_slice(), JetLevel::Full)?;
        let (s, _) = c.state(&jet, t)?;
        Ok((jet, s))
    })
}

fn tractor_suite(opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut r = SuiteReport::new("tractor");
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let metrics = [MetricSpec::euclidean(3), MetricSpec::round_sphere(3)];
    let (mut norm, mut deriv) = (0.0f64, 0.0f64);
    for _ in 0..6 {
        let c = random_circle(&mut rng)?;
        for m in &metrics {
            let f = oracle_sampler(m, &c);
            for t in linspace(0.0, 1.0, 6) {
                let (jet, s) = f(t)?;
                norm = norm.max(tractor_norm(&jet, &acceleration_tractor(&jet, &s)?).abs());
                deriv = deriv.max(acceleration_derivative_along(&f, t, 1e-3)?.max_abs());
            }
        }
    }
    r.at_most("circles: max |<A,A>|", norm, 1e-9);
    r.at_most("circles: max |dA/dt|", deriv, 1e-8);

    let spiral = OracleCurve::Spiral(SpiralParams::new(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0; 3], 2.0)?);
    let mut spiral_norm = f64::INFINITY;
    for m in &metrics {
        let f = oracle_sampler(m, &spiral);
        for t in linspace(0.0, 1.0, 11) {
            let (jet, s) = f(t)?;
            spiral_norm = spiral_norm.min(tractor_norm(&jet, &acceleration_tractor(&jet, &s)?).abs());
        }
    }
    r.at_least("spirals: min |<A,A>|", spiral_norm, 1e-2);

    let mut energy = 0.0f64;
    for m in [MetricSpec::euclidean(3), MetricSpec::round_sphere(3), warped3()] {
        for _ in 0..50 {
            let x = random_vec(&mut rng, 3, 0.6);
            let mut u = random_vec(&mut rng, 3, 1.0);
            u[0] += 1.5;
            let s = CurveState::with_jerk(x.clone(), u, random_vec(&mut rng, 3, 2.0), random_vec(&mut rng, 3, 2.0));
            let jet = geometry_jet(&m, x.as_slice(), JetLevel::Curvature)?;
            let l = lagrangian(&jet, &s)?;
            energy = energy.max((tractor_kinetic_energy(&jet, &s)? - l).abs() / (1.0 + l.abs()));
        }
    }
    r.at_most("random 3-jets: |kinetic energy - L|", energy, 1e-8);

    if let Some(cfg) = &opts.run {
        let metric = cfg.metric.build()?;
        let traj = cfg.run()?;
        let rep = free_particle_report(&traj, &|x| geometry_jet(&metric, x, JetLevel::Curvature))?;
        r.notes.push(format!("configured {} run on {}", cfg.equation, metric.name()));
        r.at_most("configured run: max |<A,A>|", rep.max_norm, 1e-8);
        r.at_most("configured run: max |dA/dt| (finite differences)", rep.max_derivative, 1e-6);
    }
    Ok(r)
}

fn twisted(t: Series) -> Result<SeriesPoint> {
    Ok(vec![t + 0.3, t * t * 0.5 + (t * 2.0).sin() * 0.1, t.cos() * 0.4 + t * t * t * 0.2])
}

pub type Panel = (Vec<Box<dyn CurveSource>>, Vec<VariationField>);

/// Curves and fields of the first-variation panel.
pub fn theorem1_panel() -> Result<Panel> {
    let s = 0.5f64.sqrt();
    let tilted = OracleCurve::Spiral(SpiralParams::new(&[0.5, 0.0, 0.0], &[0.0, 0.5 * s, 0.5 * s], &[0.2, -0.1, 0.3], 2.0)?);
    let image = OracleCurve::ConformalImage { base: Box::new(tilted.clone()), b: vec![0.1, -0.05, 0.08] };
    let curves: Vec<Box<dyn CurveSource>> = vec![Box::new(tilted), Box::new(SeriesCurve { dim: 3, f: twisted }), Box::new(image)];
    let fields = vec![
        VariationField::bump(0.1, 0.6, vec![0.0, 0.0, 1.0]),
        VariationField::bump(0.3, 0.9, vec![1.0, -0.5, 0.2]),
        VariationField::wave(vec![0.3, -0.2, 0.5], 3.0, 0.4),
        VariationField::polynomial(0.5, vec![vec![0.1, 0.0, -0.2], vec![0.0, 0.3, 0.1], vec![0.2, 0.1, 0.0]]),
        VariationField::wave(vec![-0.1, 0.4, 0.2], 5.0, 1.1),
        VariationField::polynomial(0.0, vec![vec![0.0; 3], vec![0.2, -0.1, 0.0], vec![0.0; 3], vec![0.1, 0.1, -0.3]]),
    ];
    Ok((curves, fields))
}

fn theorem1_suite() -> Result<SuiteReport> {
    let (curves, fields) = theorem1_panel()?;
    let mut pairs = 0usize;
    let mut worst = 0.0f64;
    let mut worst_stationary = 0.0f64;
    for m in [MetricSpec::euclidean(3), MetricSpec::round_sphere(3)] {
        for c in &curves {
            for v in &fields {
                let f = first_variation_formula(&m, c.as_ref(), v, 0.0, 1.0, DEFAULT_SAMPLES)?;
                let d = first_variation_fd(&m, c.as_ref(), v, 0.0, 1.0, DEFAULT_SAMPLES, DEFAULT_VARIATION_STEP)?;
                if d.value.abs() < 1e-9 {
                    worst_stationary = worst_stationary.max((f.total() - d.value).abs());
                } else {
                    worst = worst.max((f.total() - d.value).abs() / d.value.abs());
                    pairs += 1;
                }
            }
        }
    }
    let mut r = SuiteReport::new("theorem1");
    r.notes.push("pairs with |dI| < 1e-9 (Euler-Lagrange solutions under compact variations) are compared absolutely".into());
    r.at_least("compared (curve, variation) pairs", pairs as f64, 20.0);
    r.at_most("max relative error, formula vs finite differences", worst, 1e-5);
    r.at_most("max absolute error on stationary pairs", worst_stationary, 1e-9);
    Ok(r)
}

fn hamiltonian_suite() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("hamiltonian");
    let tight = Settings::rkf45(1e-12);
    let v = |x: &[f64]| DVector::from_column_slice(x);

    // Ostrogradsky flow against the fourth-order flow on the generic Figure 1 data.
    let m = MetricSpec::euclidean(3);
    let jet = geometry_jet(&m, &FIGURE1_X, JetLevel::Full)?;
    let mut s0 = CurveState::new(v(&FIGURE1_X), v(&FIGURE1_U), v(&FIGURE1_A));
    s0.j = Some(flat_jerk_from_c(&jet, &s0, &v(&[0.0, 0.0, 1.0]))?);
    let times = linspace(0.0, 1.0, 41);
    let reference = CurveFlow::mercator(m).run(&s0, &times, &tight)?;
    let o0 = OstrogradskyState::from_curve(&s0)?;
    let canon = run_ostrogradsky(&o0, &times, &tight)?;
    let (mut dev, mut h_drift) = (0.0f64, 0.0f64);
    for i in 0..times.len() {
        let o = OstrogradskyState::from_flat(3, &canon.states[i])?;
        let s = o.to_curve()?;
        let rs = reference.curve_state(i)?;
        dev = dev
            .max((&s.x - &rs.x).amax())
            .max((&s.u - &rs.u).amax())
            .max((&s.a - &rs.a).amax())
            .max((s.jerk()? - rs.jerk()?).amax());
        h_drift = h_drift.max((ostro_hamiltonian(&o) - ostro_hamiltonian(&o0)).abs());
    }
    r.at_most("Ostrogradsky vs fourth-order flow", dev, 1e-8);
    r.at_most("Ostrogradsky H drift", h_drift, 1e-9);

    // Poisson flow: third-order residual by Richardson-extrapolated differences.
    let ks4 = KahlerStructure::standard(4, 1.0)?;
    let w = 1.3;
    let z0 = [0.1, 0.2, 0.3, 0.4, 1.0, -0.5, 0.2, 0.3, 0.4, 0.1, -0.2, 0.6];
    let h = 0.01;
    let times = linspace(0.0, 2.0, 201);
    let pt = run_poisson(&ks4, w, &z0, &times, &tight)?;
    let field = |k: usize, name: &str| pt.field(k, name).expect("poisson trajectory has x, U, A");
    let deriv = |name: &str, i: usize, s: usize| {
        (field(i - 2 * s, name) - field(i + 2 * s, name) + (field(i + s, name) - field(i - s, name)) * 8.0) / (12.0 * h * s as f64)
    };
    let mut poisson = 0.0f64;
    let mut h_au = 0.0f64;
    for i in 0..times.len() {
        h_au = h_au.max((hamiltonian_au(&ks4, &pt.states[i]) - hamiltonian_au(&ks4, &z0)).abs());
        if (4..times.len() - 4).contains(&i) {
            let a_dot = (deriv("A", i, 1) * 16.0 - deriv("A", i, 2)) / 15.0;
            poisson = poisson.max((a_dot + field(i, "U") * (w * w)).amax());
        }
    }
    r.at_most("Poisson flow residual of X''' + w^2 X'", poisson, 1e-9);
    r.at_most("Poisson flow H = Omega(A,U) drift", h_au, 1e-10);
    for n in [2, 4] {
        let ks = KahlerStructure::standard(n, 1.0)?;
        r.at_most(&format!("Jacobi identity on coordinate triples, n = {n}"), jacobi_coordinate_triples(&ks, w), 0.0);
        let d = dirac_bracket_check(&ks, w)?;
        r.at_most(&format!("Dirac reduction vs displayed brackets, n = {n}"), d.max_residual(), 1e-12);
        if n == 2 {
            r.notes.push(format!("constraint matrix {{psi_c, psi_d}} = {} * Omega_cd", d.constraint_sign));
        }
    }

    // Magnetic geodesics are arc-length conformal geodesics with |A| = |e|.
    let e = 0.7;
    let ks = KahlerStructure::standard(4, e)?;
    let u0 = v(&[0.3, -0.5, 0.6, 0.2]).normalize();
    let times = linspace(0.0, 10.0, 101);
    let mag = run_magnetic(&ks, &[0.1, 0.2, -0.3, 0.0], u0.as_slice(), &times, &tight)?;
    let flat4 = MetricSpec::euclidean(4);
    let (mut pauls, mut a_drift) = (0.0f64, 0.0f64);
    for i in 0..times.len() {
        let s = mag.curve_state(i)?;
        let jet = geometry_jet(&flat4, s.x.as_slice(), JetLevel::Curvature)?;
        let along = ks.complex_structure() * &s.a * e;
        pauls = pauls.max((arclength_jerk(&jet, &s)? - along).amax());
        a_drift = a_drift.max((s.a.norm() - e.abs()).abs());
    }
    r.at_most("magnetic: arc-length equation residual", pauls, 1e-9);
    r.at_most("magnetic: | |A| - |e| |", a_drift, 1e-9);

    // CKY first integrals along an arc-length conformal geodesic.
    let cg0 = CurveState::new(v(&[0.1, 0.2, 0.3]), v(&[0.6, 0.8, 0.0]), v(&[-0.4, 0.3, 0.5]));
    let cg = run_arclength(&MetricSpec::euclidean(3), &cg0, &times, &tight)?;
    let drift = |pair: &CkyPair| -> Result<f64> {
        let mut q0 = None;
        let mut worst = 0.0f64;
        for i in 0..cg.len() {
            let s = cg.curve_state(i)?;
            let q = first_integral_q(pair, s.x.as_slice(), &s.u, &s.a)?;
            worst = worst.max((q - *q0.get_or_insert(q)).abs());
        }
        Ok(worst)
    };
    let cky = CkyPair::position_wedge(&[0.3, -0.7, 1.1])?;
    let control = CkyPair::from_upper(3, &[(0, 1, "x1*x2")], &["0", "0", "0"])?;
    let jet = geometry_jet(&MetricSpec::euclidean(3), &[0.1, 0.2, 0.3], JetLevel::Curvature)?;
    r.at_most("CKY residual of x^k pair", cky_residual(&jet, &cky, &[0.1, 0.2, 0.3])?.max_abs(), 1e-12);
    r.at_most("Q drift for a CKY pair", drift(&cky)?, 1e-8);
    r.at_least("Q drift for a non-CKY control", drift(&control)?, 1e-3);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_bookkeeping() {
        let mut r = SuiteReport::new("x");
        r.at_most("a", 1.0, 2.0);
        assert!(r.passed);
        r.at_least("b", f64::NAN, 1.0);
        assert!(!r.passed);
        assert!(!r.check("b").unwrap().passed);
        assert!("nope".parse::<Suite>().is_err());
        assert_eq!("theorem1".parse::<Suite>().unwrap(), Suite::Theorem1);
    }

    #[test]
    fn torsion_of_a_helix() {
        // (cos t, sin t, t/2) has torsion (1/2)/(1 + 1/4)
        let u = DVector::from_column_slice(&[0.0, 1.0, 0.5]);
        let a = DVector::from_column_slice(&[-1.0, 0.0, 0.0]);
        let j = DVector::from_column_slice(&[0.0, -1.0, 0.0]);
        assert!((torsion(&u, &a, &j) - 0.4).abs() < 1e-15);
    }
}
