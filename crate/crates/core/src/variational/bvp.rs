//! Two-point boundary value problem for the fourth-order equation: given the
//! end points and end tangents, find the initial `(A, J)` by shooting.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::CurveFlow;
use crate::error::{Error, Result};
use crate::geometry::MetricSpec;
use crate::integrate::{linspace, Settings};
use crate::state::CurveState;
use crate::trajectory::Trajectory;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BvpProblem {
    pub t0: f64,
    pub t1: f64,
    pub x0: Vec<f64>,
    pub u0: Vec<f64>,
    pub x1: Vec<f64>,
    pub u1: Vec<f64>,
}

impl BvpProblem {
    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for v in [&self.x0, &self.u0, &self.x1, &self.u1] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: v.len() });
            }
        }
        if !(self.t1 > self.t0) {
            return Err(Error::BadParams(format!("need t0 < t1, got [{}, {}]", self.t0, self.t1)));
        }
        if self.x0 == self.x1 {
            return Err(Error::BadParams("end points coincide".into()));
        }
        if self.u0.iter().all(|v| *v == 0.0) || self.u1.iter().all(|v| *v == 0.0) {
            return Err(Error::BadParams("end tangents must be nonzero".into()));
        }
        Ok(())
    }

    /// End data sampled from a trajectory at its first and last samples.
    pub fn from_trajectory(traj: &Trajectory) -> Result<Self> {
        let last = traj.len() - 1;
        let s0 = traj.curve_state(0)?;
        let s1 = traj.curve_state(last)?;
        Ok(BvpProblem {
            t0: traj.times[0],
            t1: traj.times[last],
            x0: s0.x.as_slice().to_vec(),
            u0: s0.u.as_slice().to_vec(),
            x1: s1.x.as_slice().to_vec(),
            u1: s1.u.as_slice().to_vec(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BvpSettings {
    pub damping: f64,
    pub max_iterations: usize,
    /// Converged when the residual norm drops below this.
    pub tolerance: f64,
    /// Relative step of the finite-difference Jacobian.
    pub fd_step: f64,
    pub integrator: Settings,
    /// Samples of the returned trajectory.
    pub samples: usize,
}

impl Default for BvpSettings {
    fn default() -> Self {
        BvpSettings {
            damping: 1e-3,
            max_iterations: 100,
            tolerance: 1e-8,
            fd_step: 1e-6,
            integrator: Settings { max_steps: 5000, ..Settings::rkf45(1e-12) },
            samples: 101,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub residual: f64,
    pub damping: f64,
    /// Actual over predicted reduction of the trial step.
    pub gain_ratio: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BvpSolution {
    pub a0: Vec<f64>,
    pub j0: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub trajectory: Trajectory,
    pub trace: Vec<TraceRow>,
}

struct Shooter<'a> {
    flow: CurveFlow,
    problem: &'a BvpProblem,
    settings: &'a BvpSettings,
    n: usize,
}

impl Shooter<'_> {
    fn state(&self, p: &DVector<f64>) -> CurveState {
        let n = self.n;
        CurveState::with_jerk(
            DVector::from_column_slice(&self.problem.x0),
            DVector::from_column_slice(&self.problem.u0),
            p.rows(0, n).into_owned(),
            p.rows(n, n).into_owned(),
        )
    }

    fn residual(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        let traj = self.flow.run(&self.state(p), &[self.problem.t0, self.problem.t1], &self.settings.integrator)?;
        let y = &traj.states[1];
        let n = self.n;
        Ok(DVector::from_fn(2 * n, |i, _| {
            if i < n {
                y[i] - self.problem.x1[i]
            } else {
                y[i] - self.problem.u1[i - n]
            }
        }))
    }

    fn jacobian(&self, p: &DVector<f64>) -> Result<DMatrix<f64>> {
        let m = p.len();
        let cols: Vec<Result<DVector<f64>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..m)
                .map(|k| {
                    scope.spawn(move || {
                        let h = self.settings.fd_step * p[k].abs().max(1.0);
                        let mut pp = p.clone();
                        pp[k] += h;
                        let rp = self.residual(&pp)?;
                        pp[k] = p[k] - h;
                        let rm = self.residual(&pp)?;
                        Ok((rp - rm) / (2.0 * h))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("jacobian worker panicked")).collect()
        });
        let cols = cols.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_columns(&cols))
    }
}

/// Levenberg–Marquardt shooting on `(x(t1) − x1, U(t1) − U1)` over the unknowns
/// `(A(t0), J(t0))`. The default guess is `A = J = 0`.
pub fn bvp_shoot(
    metric: &MetricSpec,
    problem: &BvpProblem,
    guess: Option<(DVector<f64>, DVector<f64>)>,
    settings: &BvpSettings,
) -> Result<BvpSolution> {
    let n = metric.dim();
    problem.validate(n)?;
    let shooter = Shooter { flow: CurveFlow::mercator(metric.clone()), problem, settings, n };
    let mut p = match guess {
        Some((a, j)) => {
            if a.len() != n || j.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: a.len().min(j.len()) });
            }
            DVector::from_iterator(2 * n, a.iter().chain(j.iter()).copied())
        }
        None => DVector::zeros(2 * n),
    };

    let mut r = shooter.residual(&p)?;
    let mut lambda = settings.damping;
    let mut nu = 2.0;
    let mut trace = vec![TraceRow { iteration: 0, residual: r.norm(), damping: lambda, gain_ratio: f64::NAN, accepted: true }];
    let mut iterations = 0;
    while r.norm() >= settings.tolerance {
        if iterations == settings.max_iterations {
            return Err(Error::NoConvergence { iterations, best_residual: r.norm() });
        }
        iterations += 1;
        let jac = shooter.jacobian(&p)?;
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let dmax = jtj.diagonal().amax().max(f64::MIN_POSITIVE);
        let diag = jtj.diagonal().map(|d| d.max(1e-12 * dmax));
        // retry with growing damping until a step is accepted
        loop {
            let mut lhs = jtj.clone();
            for i in 0..2 * n {
                lhs[(i, i)] += lambda * diag[i];
            }
            let step = lhs.lu().solve(&(-&g)).ok_or(Error::SingularLinearSystem)?;
            let predicted = 0.5 * step.dot(&(diag.component_mul(&step) * lambda - &g));
            let trial = &p + &step;
            let (rho, r_new) = match shooter.residual(&trial) {
                Ok(rn) => ((0.5 * (r.norm_squared() - rn.norm_squared())) / predicted, Some(rn)),
                Err(_) => (f64::NEG_INFINITY, None),
            };
            let accepted = rho > 0.0 && rho.is_finite();
            trace.push(TraceRow {
                iteration: iterations,
                residual: r_new.as_ref().map_or(f64::NAN, |v| v.norm()),
                damping: lambda,
                gain_ratio: rho,
                accepted,
            });
            if accepted {
                p = trial;
                r = r_new.expect("accepted step has a residual");
                lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                break;
            }
            lambda *= nu;
            nu *= 2.0;
            if !lambda.is_finite() || step.norm() <= 1e-15 * (p.norm() + 1e-15) {
                return Err(Error::NoConvergence { iterations, best_residual: r.norm() });
            }
        }
    }

    let a0 = p.rows(0, n).iter().copied().collect();
    let j0 = p.rows(n, n).iter().copied().collect();
    let times = linspace(problem.t0, problem.t1, settings.samples.max(2));
    let trajectory = shooter.flow.run(&shooter.state(&p), &times, &settings.integrator)?;
    Ok(BvpSolution { a0, j0, iterations, residual: r.norm(), trajectory, trace })
}
