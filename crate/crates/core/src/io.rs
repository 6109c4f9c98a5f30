//! Configuration files and deterministic serialisation of trajectories.
//!
//! CSV values use 17 significant digits (`{:.16e}`); JSON documents carry the
//! SHA-256 of the configuration that produced them and no timestamps, so the
//! same configuration always yields byte-identical output.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dynamics::{flat_jerk_from_c, CurveFlow, Equation};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{geometry_jet, JetLevel, MetricSpec};
use crate::hamiltonian::run_arclength;
use crate::integrate::{linspace, Method, Settings, DEFAULT_TOL};
use crate::state::CurveState;
use crate::trajectory::Trajectory;
use crate::variational::TraceRow;

/// Environment variable overriding the default integrator tolerance.
pub const TOL_ENV: &str = "CONFGEO_DEFAULT_TOL";

/// Default tolerance: `CONFGEO_DEFAULT_TOL` when set and valid, else 1e-10.
pub fn default_tol() -> Result<f64> {
    match std::env::var(TOL_ENV) {
        Err(_) => Ok(DEFAULT_TOL),
        Ok(s) => match s.trim().parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
            _ => Err(Error::Config(format!("{TOL_ENV}={s:?} is not a positive number"))),
        },
    }
}

/// `{kind, dim, signature, parameters}` description of a metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub kind: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, Value>,
}

impl MetricConfig {
    pub fn named(kind: &str, dim: usize) -> Self {
        MetricConfig { kind: kind.to_string(), dim, signature: None, parameters: BTreeMap::new() }
    }

    fn param_str(&self, key: &str) -> Result<String> {
        match self.parameters.get(key) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(Error::Config(format!("metric parameter {key:?} must be a string"))),
            None => Err(Error::Config(format!("metric kind {:?} needs parameter {key:?}", self.kind))),
        }
    }

    fn param_exprs(&self, key: &str) -> Result<Vec<Expr>> {
        match self.parameters.get(key) {
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => Expr::parse(s),
                    Value::Number(n) => Ok(Expr::constant(n.as_f64().unwrap_or(f64::NAN))),
                    _ => Err(Error::Config(format!("entries of {key:?} must be expressions"))),
                })
                .collect(),
            _ => Err(Error::Config(format!("metric kind {:?} needs an array parameter {key:?}", self.kind))),
        }
    }

    fn signature_or_euclidean(&self) -> Result<Vec<f64>> {
        let s = self.signature.clone().unwrap_or_else(|| vec![1.0; self.dim]);
        if s.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: s.len() });
        }
        Ok(s)
    }

    pub fn build(&self) -> Result<MetricSpec> {
        if self.dim == 0 {
            return Err(Error::Config("metric dimension must be positive".into()));
        }
        let kind = self.kind.trim();
        let mut m = if let Some(inner) = kind.strip_prefix("conformally-flat(").and_then(|r| r.strip_suffix(')')) {
            MetricSpec::conformally_flat(self.dim, Expr::parse(inner)?)
        } else {
            match kind {
                "flat-euclidean" => MetricSpec::euclidean(self.dim),
                "flat-minkowski" => MetricSpec::minkowski(self.dim),
                "flat" => MetricSpec::flat(self.signature_or_euclidean()?),
                "round-sphere-stereographic" => MetricSpec::round_sphere(self.dim),
                "conformally-flat" => MetricSpec::conformally_flat(self.dim, Expr::parse(&self.param_str("factor")?)?),
                "diagonal" => MetricSpec::diagonal("diagonal", self.param_exprs("entries")?, self.signature_or_euclidean()?)?,
                "components" => {
                    MetricSpec::from_components("components", self.dim, self.param_exprs("upper")?, self.signature_or_euclidean()?)?
                }
                other => return Err(Error::Config(format!("unknown metric kind {other:?}"))),
            }
        };
        if m.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: m.dim() });
        }
        if let Some(name) = self.parameters.get("name").and_then(Value::as_str) {
            m = m.with_name(name);
        }
        if self.parameters.contains_key("domain") {
            m = m.with_domain(Expr::parse(&self.param_str("domain")?)?);
        }
        if let Some(h) = self.parameters.get("finite_difference_step") {
            let h = h.as_f64().filter(|h| *h > 0.0).ok_or_else(|| Error::Config("finite_difference_step must be positive".into()))?;
            m = m.with_finite_differences(h);
        }
        Ok(m)
    }
}

/// Initial data. Vectors are covariant along the curve: `U = ẋ`, `A = ∇_U U`, `J = ∇_U A`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<Vec<f64>>,
    /// First integral of the flat fourth-order flow, used instead of `J`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
}

impl InitialData {
    /// Parses `"x;U[;A[;J]]"` with comma-separated components.
    pub fn parse(src: &str) -> Result<Self> {
        let blocks = src
            .split(';')
            .map(|b| parse_vector(b))
            .collect::<Result<Vec<_>>>()?;
        if blocks.len() < 2 || blocks.len() > 4 {
            return Err(Error::Config(format!("initial data needs 2 to 4 ';'-separated vectors, got {}", blocks.len())));
        }
        let mut it = blocks.into_iter();
        Ok(InitialData { x: it.next().unwrap(), u: it.next().unwrap(), a: it.next(), j: it.next(), c: None })
    }
}

/// Parses `"1,0,-2.5"`.
pub fn parse_vector(src: &str) -> Result<Vec<f64>> {
    src.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number {s:?} in {src:?}"))))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub metric: MetricConfig,
    /// `cg3`, `mercator4`, `geodesic` or `arclength`.
    pub equation: String,
    pub initial: InitialData,
    pub t0: f64,
    pub t1: f64,
    pub samples: usize,
    pub settings: Settings,
}

impl RunConfig {
    pub fn hash(&self) -> String {
        config_hash(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.metric.dim;
        let check = |v: &[f64]| {
            if v.len() != n {
                Err(Error::DimensionMismatch { expected: n, got: v.len() })
            } else {
                Ok(())
            }
        };
        check(&self.initial.x)?;
        check(&self.initial.u)?;
        for v in [&self.initial.a, &self.initial.j, &self.initial.c].into_iter().flatten() {
            check(v)?;
        }
        if self.samples < 2 {
            return Err(Error::Config("need at least 2 samples".into()));
        }
        if !(self.t1 > self.t0) {
            return Err(Error::Config("t1 must exceed t0".into()));
        }
        if !(self.settings.atol > 0.0 && self.settings.rtol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.settings.method == Method::Rk4 && self.settings.step.is_none() {
            return Err(Error::Config("rk4 needs a step size".into()));
        }
        let has_a = self.initial.a.is_some();
        match self.equation.as_str() {
            "geodesic" => {}
            "cg3" | "arclength" if has_a => {}
            "mercator4" if has_a && (self.initial.j.is_some() != self.initial.c.is_some()) => {}
            "mercator4" if has_a => {
                return Err(Error::Config("mercator4 needs exactly one of the jerk J or the vector C".into()))
            }
            "cg3" | "arclength" | "mercator4" => {
                return Err(Error::Config(format!("{} needs an initial acceleration", self.equation)))
            }
            other => return Err(Error::Config(format!("unknown equation {other:?}"))),
        }
        if self.initial.c.is_some() && self.equation != "mercator4" {
            return Err(Error::Config("a C vector only applies to mercator4".into()));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        linspace(self.t0, self.t1, self.samples)
    }

    pub fn run(&self) -> Result<Trajectory> {
        self.validate()?;
        let metric = self.metric.build()?;
        let v = |x: &Vec<f64>| DVector::from_column_slice(x);
        let init = &self.initial;
        let zero = vec![0.0; metric.dim()];
        let mut s0 = CurveState::new(v(&init.x), v(&init.u), v(init.a.as_ref().unwrap_or(&zero)));
        s0.j = init.j.as_ref().map(v);
        let times = self.times();
        match self.equation.as_str() {
            "geodesic" => CurveFlow::geodesic(metric).run(&s0, &times, &self.settings),
            "cg3" => CurveFlow::conformal_geodesic(metric).run(&s0, &times, &self.settings),
            "arclength" => run_arclength(&metric, &s0, &times, &self.settings),
            _ => match &init.c {
                Some(c) => {
                    let c = v(c);
                    if metric.is_flat() {
                        let jet = geometry_jet(&metric, &init.x, JetLevel::Curvature)?;
                        s0.j = Some(flat_jerk_from_c(&jet, &s0, &c)?);
                    }
                    CurveFlow::new(metric, Equation::FlatMercator(c))?.run(&s0, &times, &self.settings)
                }
                None => CurveFlow::mercator(metric).run(&s0, &times, &self.settings),
            },
        }
    }
}

/// SHA-256 (hex) of the canonical JSON serialisation of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("configuration serialises");
    Sha256::digest(&bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// A float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = traj.columns().join(",");
    out.push('\n');
    for (t, y) in traj.times.iter().zip(&traj.states) {
        out.push_str(&fmt_f64(*t));
        for v in y {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// Parses the CSV written by [`trajectory_csv`] back into columns and rows.
pub fn parse_csv(src: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = src.lines();
    let header = lines.next().ok_or_else(|| Error::Config("empty CSV".into()))?;
    let columns: Vec<String> = header.split(',').map(str::to_string).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let row = parse_vector(l)?;
            if row.len() != columns.len() {
                return Err(Error::Config(format!("row has {} values, header has {}", row.len(), columns.len())));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((columns, rows))
}

#[derive(Serialize)]
struct TrajectoryDocument<'a, C: Serialize> {
    config_hash: String,
    config: &'a C,
    metadata: &'a crate::trajectory::Metadata,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

/// JSON document with the producing configuration, its hash, solver metadata and samples.
pub fn trajectory_json<C: Serialize>(traj: &Trajectory, config: &C) -> String {
    let rows = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, y)| std::iter::once(*t).chain(y.iter().copied()).collect())
        .collect();
    let doc = TrajectoryDocument { config_hash: config_hash(config), config, metadata: &traj.meta, columns: traj.columns(), rows };
    let mut s = serde_json::to_string_pretty(&doc).expect("trajectory serialises");
    s.push('\n');
    s
}

/// Pretty JSON with a trailing newline and the hash of `config` attached as `config_hash`.
pub fn report_json<R: Serialize, C: Serialize>(report: &R, config: &C) -> String {
    let mut v = serde_json::to_value(report).expect("report serialises");
    if let Value::Object(map) = &mut v {
        map.insert("config_hash".into(), Value::String(config_hash(config)));
    }
    let mut s = serde_json::to_string_pretty(&v).expect("report serialises");
    s.push('\n');
    s
}

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("iteration,residual,damping,gain_ratio,accepted\n");
    for r in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.iteration,
            fmt_f64(r.residual),
            fmt_f64(r.damping),
            fmt_f64(r.gain_ratio),
            r.accepted
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_metrics() {
        assert!(MetricConfig::named("flat-euclidean", 3).build().unwrap().is_flat());
        assert_eq!(MetricConfig::named("flat-minkowski", 4).build().unwrap().signature()[0], -1.0);
        let s = MetricConfig::named("round-sphere-stereographic", 3).build().unwrap();
        assert!((s.eval(&[0.0; 3]).unwrap()[(0, 0)] - 4.0).abs() < 1e-15);
        let c = MetricConfig::named("conformally-flat(exp(x1))", 3).build().unwrap();
        assert!((c.eval(&[1.0, 0.0, 0.0]).unwrap()[(1, 1)] - 1f64.exp().powi(2)).abs() < 1e-12);
        assert!(matches!(MetricConfig::named("hyperbolic", 3).build(), Err(Error::Config(_))));
    }

    #[test]
    fn metric_from_json() {
        let src = r#"{"kind": "diagonal", "dim": 3, "parameters": {"entries": ["1 + x2^2", 1, "exp(x1)"]}}"#;
        let m: MetricConfig = serde_json::from_str(src).unwrap();
        let g = m.build().unwrap().eval(&[0.0, 2.0, 0.0]).unwrap();
        assert_eq!(g[(0, 0)], 5.0);
        let bad = r#"{"kind": "conformally-flat", "dim": 3}"#;
        assert!(serde_json::from_str::<MetricConfig>(bad).unwrap().build().is_err());
    }

    #[test]
    fn initial_data_parsing() {
        let d = InitialData::parse("0,0,0; 1,0,0; 0.1,1,0").unwrap();
        assert_eq!(d.a, Some(vec![0.1, 1.0, 0.0]));
        assert!(d.j.is_none());
        assert!(InitialData::parse("0,0,0").is_err());
        assert!(InitialData::parse("0,0,x;1,0,0").is_err());
    }

    #[test]
    fn csv_has_seventeen_digits_and_round_trips() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        let v = 1.0 / 3.0;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        let (cols, rows) = parse_csv("t,x1\n0.0000000000000000e0,1.5000000000000000e0\n").unwrap();
        assert_eq!(cols, vec!["t", "x1"]);
        assert_eq!(rows, vec![vec![0.0, 1.5]]);
        assert!(parse_csv("t,x1\n1,2,3\n").is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = MetricConfig::named("flat-euclidean", 3);
        let b = MetricConfig::named("flat-euclidean", 4);
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn run_config_validation() {
        let mut cfg = RunConfig {
            metric: MetricConfig::named("flat-euclidean", 3),
            equation: "cg3".into(),
            initial: InitialData::parse("0,0,0;1,0,0;0,1,0").unwrap(),
            t0: 0.0,
            t1: 1.0,
            samples: 11,
            settings: Settings::rkf45(1e-10),
        };
        cfg.validate().unwrap();
        cfg.equation = "mercator4".into();
        assert!(cfg.validate().is_err());
        cfg.initial.c = Some(vec![0.0; 3]);
        cfg.validate().unwrap();
        cfg.initial.j = Some(vec![0.0; 3]);
        assert!(cfg.validate().is_err());
        cfg.equation = "nope".into();
        assert!(cfg.validate().is_err());
    }
}
