//! Explicit Runge–Kutta integration of first-order systems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A first-order autonomous or time-dependent system `y' = f(t, y)`.
pub trait Flow: Sync {
    fn len(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

/// Wraps a closure as a [`Flow`].
pub struct FnFlow<F> {
    pub len: usize,
    pub f: F,
}

impl<F> Flow for FnFlow<F>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()> + Sync,
{
    fn len(&self) -> usize {
        self.len
    }
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        (self.f)(t, y, dy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Rkf45,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Method::Rk4),
            "rkf45" => Ok(Method::Rkf45),
            _ => Err(Error::Config(format!("unknown method {s:?} (expected rk4 or rkf45)"))),
        }
    }
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Rk4 => "rk4",
            Method::Rkf45 => "rkf45",
        }
    }
}

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub method: Method,
    pub atol: f64,
    pub rtol: f64,
    /// Fixed step for rk4, initial step for rkf45.
    pub step: Option<f64>,
    pub max_steps: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { method: Method::Rkf45, atol: DEFAULT_TOL, rtol: DEFAULT_TOL, step: None, max_steps: 1_000_000 }
    }
}

impl Settings {
    pub fn rk4(step: f64) -> Self {
        Settings { method: Method::Rk4, step: Some(step), ..Default::default() }
    }

    pub fn rkf45(tol: f64) -> Self {
        Settings { atol: tol, rtol: tol, ..Default::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Integrates from `times[0]` through every later entry of `times`, landing exactly on
/// each. Returns the state at every requested time (the first is `y0`).
pub fn integrate(flow: &dyn Flow, y0: &[f64], times: &[f64], settings: &Settings) -> Result<(Vec<Vec<f64>>, Stats)> {
    if y0.len() != flow.len() {
        return Err(Error::DimensionMismatch { expected: flow.len(), got: y0.len() });
    }
    if times.len() < 2 {
        return Err(Error::BadParams("need at least two sample times".into()));
    }
    let dir = (times[1] - times[0]).signum();
    if dir == 0.0 || times.windows(2).any(|w| (w[1] - w[0]) * dir <= 0.0) {
        return Err(Error::BadParams("sample times must be strictly monotone".into()));
    }
    let mut stats = Stats::default();
    let mut out = vec![y0.to_vec()];
    let mut y = y0.to_vec();
    let mut h_guess = settings.step.unwrap_or((times[times.len() - 1] - times[0]).abs() / 100.0);
    for w in times.windows(2) {
        match settings.method {
            Method::Rk4 => {
                let span = w[1] - w[0];
                let nsteps = (span.abs() / h_guess).ceil().max(1.0) as usize;
                let h = span / nsteps as f64;
                for k in 0..nsteps {
                    let t = w[0] + k as f64 * h;
                    y = rk4_step(flow, t, &y, h, &mut stats)?;
                    stats.accepted += 1;
                }
            }
            Method::Rkf45 => {
                y = rkf45_segment(flow, w[0], w[1], y, &mut h_guess, settings, &mut stats)?;
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

fn eval(flow: &dyn Flow, t: f64, y: &[f64], stats: &mut Stats) -> Result<Vec<f64>> {
    let mut dy = vec![0.0; y.len()];
    stats.rhs_evals += 1;
    flow.rhs(t, y, &mut dy).map_err(|e| match e {
        Error::Rhs { .. } => e,
        other => Error::Rhs { t, source: Box::new(other) },
    })?;
    if dy.iter().any(|v| !v.is_finite()) {
        return Err(Error::Rhs { t, source: Box::new(Error::SingularLinearSystem) });
    }
    Ok(dy)
}

fn axpy(y: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (c, k) in terms {
        if *c == 0.0 {
            continue;
        }
        for (o, ki) in out.iter_mut().zip(k.iter()) {
            *o += h * c * ki;
        }
    }
    out
}

pub fn rk4_step(flow: &dyn Flow, t: f64, y: &[f64], h: f64, stats: &mut Stats) -> Result<Vec<f64>> {
    let k1 = eval(flow, t, y, stats)?;
    let k2 = eval(flow, t + 0.5 * h, &axpy(y, h, &[(0.5, &k1)]), stats)?;
    let k3 = eval(flow, t + 0.5 * h, &axpy(y, h, &[(0.5, &k2)]), stats)?;
    let k4 = eval(flow, t + h, &axpy(y, h, &[(1.0, &k3)]), stats)?;
    Ok(axpy(y, h, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)]))
}

/// One Fehlberg step; returns the fifth-order solution and the error estimate.
fn rkf45_step(flow: &dyn Flow, t: f64, y: &[f64], h: f64, stats: &mut Stats) -> Result<(Vec<f64>, Vec<f64>)> {
    let k1 = eval(flow, t, y, stats)?;
    let k2 = eval(flow, t + h / 4.0, &axpy(y, h, &[(0.25, &k1)]), stats)?;
    let k3 = eval(flow, t + 3.0 * h / 8.0, &axpy(y, h, &[(3.0 / 32.0, &k1), (9.0 / 32.0, &k2)]), stats)?;
    let k4 = eval(
        flow,
        t + 12.0 * h / 13.0,
        &axpy(y, h, &[(1932.0 / 2197.0, &k1), (-7200.0 / 2197.0, &k2), (7296.0 / 2197.0, &k3)]),
        stats,
    )?;
    let k5 = eval(
        flow,
        t + h,
        &axpy(y, h, &[(439.0 / 216.0, &k1), (-8.0, &k2), (3680.0 / 513.0, &k3), (-845.0 / 4104.0, &k4)]),
        stats,
    )?;
    let k6 = eval(
        flow,
        t + h / 2.0,
        &axpy(
            y,
            h,
            &[(-8.0 / 27.0, &k1), (2.0, &k2), (-3544.0 / 2565.0, &k3), (1859.0 / 4104.0, &k4), (-11.0 / 40.0, &k5)],
        ),
        stats,
    )?;
    let y5 = axpy(
        y,
        h,
        &[
            (16.0 / 135.0, &k1),
            (6656.0 / 12825.0, &k3),
            (28561.0 / 56430.0, &k4),
            (-9.0 / 50.0, &k5),
            (2.0 / 55.0, &k6),
        ],
    );
    let err = axpy(
        &vec![0.0; y.len()],
        h,
        &[
            (1.0 / 360.0, &k1),
            (-128.0 / 4275.0, &k3),
            (-2197.0 / 75240.0, &k4),
            (1.0 / 50.0, &k5),
            (2.0 / 55.0, &k6),
        ],
    );
    Ok((y5, err))
}

fn rkf45_segment(
    flow: &dyn Flow,
    t0: f64,
    t1: f64,
    mut y: Vec<f64>,
    h_guess: &mut f64,
    s: &Settings,
    stats: &mut Stats,
) -> Result<Vec<f64>> {
    let dir = (t1 - t0).signum();
    let mut t = t0;
    let mut h = h_guess.abs().min((t1 - t0).abs()) * dir;
    loop {
        let remaining = t1 - t;
        if remaining * dir <= 0.0 {
            return Ok(y);
        }
        let last = h.abs() >= remaining.abs();
        let step = if last { remaining } else { h };
        if step.abs() < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t });
        }
        if stats.accepted + stats.rejected >= s.max_steps {
            return Err(Error::StepSizeUnderflow { t });
        }
        let (y5, err) = match rkf45_step(flow, t, &y, step, stats) {
            Ok(r) => r,
            // a failing stage far from the current point: retry with a smaller step
            Err(Error::Rhs { .. }) if step.abs() > 1e-10 * t.abs().max(1.0) => {
                stats.rejected += 1;
                h = step * 0.25;
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut norm: f64 = 0.0;
        for i in 0..y.len() {
            let scale = s.atol + s.rtol * y[i].abs().max(y5[i].abs());
            norm = norm.max(err[i].abs() / scale);
        }
        if norm <= 1.0 {
            stats.accepted += 1;
            t = if last { t1 } else { t + step };
            y = y5;
            let fac = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
            if !last || fac < 1.0 {
                h = step * fac;
                *h_guess = h.abs();
            }
        } else {
            stats.rejected += 1;
            h = step * (0.9 * norm.powf(-0.25)).clamp(0.1, 0.5);
        }
    }
}

/// Evenly spaced sample times including both ends.
pub fn linspace(t0: f64, t1: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n).map(|i| if i == n - 1 { t1 } else { t0 + (t1 - t0) * i as f64 / (n - 1) as f64 }).collect()
}
