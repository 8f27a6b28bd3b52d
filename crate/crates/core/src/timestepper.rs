//! Implicit time integration with Newton iterations on the banded Jacobian.
//!
//! Steps are one-leg theta schemes `u1 - u0 = dt * F(theta u1 + (1 - theta) u0)`.
//! Backward Euler (`theta = 1`) is the robust first-order option; the implicit
//! midpoint rule (`theta = 1/2`) makes the discrete energy balance exact
//! because the energy is quadratic.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{diagnose, energy, total_entropy, weighted_norms, DiagRecord, EntropyKind, Exponents};
use crate::model::{Field, ModelParams};
use crate::operator::Operator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimeScheme {
    BackwardEuler,
    #[default]
    Midpoint,
}

impl TimeScheme {
    pub fn theta(self) -> f64 {
        match self {
            TimeScheme::BackwardEuler => 1.0,
            TimeScheme::Midpoint => 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub t_end: f64,
    /// Defaults to `1e-6 * t_end`.
    pub dt0: Option<f64>,
    pub dt_min: f64,
    pub dt_max: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Accepted steps between diagnostic records.
    pub output_stride: usize,
    /// Accepted steps between stored snapshots; 0 keeps only the first and last.
    pub snapshot_stride: usize,
    /// Reject steps that raise `E_delta` by more than `10 * newton_tol`.
    pub energy_monotone: bool,
    pub scheme: TimeScheme,
    /// Step growth factor after an easy step.
    pub growth: f64,
    pub exponents: Option<Exponents>,
}

impl SolverConfig {
    pub fn new(t_end: f64) -> Self {
        Self {
            t_end,
            dt0: None,
            dt_min: 1e-14,
            dt_max: 1e-4,
            newton_tol: 1e-10,
            newton_max_iter: 12,
            output_stride: 1,
            snapshot_stride: 0,
            energy_monotone: true,
            scheme: TimeScheme::Midpoint,
            growth: 1.2,
            exponents: None,
        }
    }

    /// Fixed step size `dt` for the whole run.
    pub fn fixed_step(t_end: f64, dt: f64) -> Self {
        Self { dt0: Some(dt), dt_min: dt, dt_max: dt, growth: 1.0, ..Self::new(t_end) }
    }

    pub fn initial_dt(&self) -> f64 {
        self.dt0.unwrap_or(1e-6 * self.t_end)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let dt0 = self.initial_dt();
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= dt0 && dt0 <= self.dt_max) {
            return bad(format!(
                "need 0 < dt_min <= dt0 <= dt_max, got {} / {} / {}",
                self.dt_min, dt0, self.dt_max
            ));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return bad("newton tolerance and iteration cap must be positive".into());
        }
        if self.output_stride == 0 {
            return bad("output_stride must be at least 1".into());
        }
        if !(self.growth >= 1.0) {
            return bad(format!("growth factor must be >= 1, got {}", self.growth));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    NewtonFailure,
    BlowUp,
}

/// Per accepted step bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub newton_iterations: usize,
    pub energy_delta: f64,
    pub entropy: f64,
    pub min_u: f64,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub diagnostics: Vec<DiagRecord>,
    pub snapshots: Vec<(f64, Field)>,
    pub steps: Vec<StepRecord>,
    pub status: RunStatus,
    pub rejected_steps: usize,
    /// Largest count of nodes floored for `G_0` in any record.
    pub floor_events: usize,
    pub final_field: Field,
}

impl Trajectory {
    pub fn last_diagnostics(&self) -> &DiagRecord {
        self.diagnostics.last().expect("trajectory has the initial record")
    }

    /// Linear interpolation of the stored snapshots at time `t`.
    pub fn field_at(&self, t: f64) -> Option<Field> {
        let snaps = &self.snapshots;
        if snaps.is_empty() || t < snaps[0].0 || t > snaps[snaps.len() - 1].0 {
            return None;
        }
        let k = snaps.partition_point(|(ts, _)| *ts <= t).max(1).min(snaps.len() - 1);
        let (t0, f0) = &snaps[k - 1];
        let (t1, f1) = &snaps[k];
        if t1 == t0 {
            return Some(f1.clone());
        }
        let lam = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let u = f0.values().iter().zip(f1.values()).map(|(a, b)| a + lam * (b - a)).collect();
        Field::new(f0.grid().clone(), u).ok()
    }
}

/// Result of one implicit step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub field: Field,
    pub newton_iterations: usize,
    pub residual: f64,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn blend(theta: f64, new: &[f64], old: &[f64]) -> Vec<f64> {
    if theta == 1.0 {
        return new.to_vec();
    }
    new.iter().zip(old).map(|(a, b)| theta * a + (1.0 - theta) * b).collect()
}

fn theta_step(op: &Operator, old: &[f64], dt: f64, theta: f64, cfg: &SolverConfig) -> Result<(Vec<f64>, usize, f64)> {
    let mut u = old.to_vec();
    let mut last_update = f64::INFINITY;
    for iter in 0..=cfg.newton_max_iter {
        let state = blend(theta, &u, old);
        let f = op.rhs(&state)?;
        let r: Vec<f64> = (0..u.len()).map(|i| u[i] - old[i] - dt * f[i]).collect();
        let scale = max_abs(&u).max(1.0);
        let rn = max_abs(&r) / scale;
        if !rn.is_finite() {
            return Err(Error::NewtonDiverged { iterations: iter, residual: rn });
        }
        if rn <= cfg.newton_tol && (rn == 0.0 || last_update <= cfg.newton_tol * scale) {
            return Ok((u, iter, rn));
        }
        if iter == cfg.newton_max_iter {
            return Err(Error::NewtonDiverged { iterations: iter, residual: rn });
        }
        let jac = op.jacobian(&state, theta * dt)?;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = jac.factorize()?.solve(&neg);
        for (ui, di) in u.iter_mut().zip(&delta) {
            *ui += di;
        }
        last_update = max_abs(&delta);
    }
    unreachable!("loop returns on the final iteration")
}

fn check_step_params(params: &ModelParams, dt: f64) -> Result<()> {
    params.validate()?;
    if !(params.eps > 0.0 && params.delta > 0.0) {
        return Err(Error::Config(format!(
            "time stepping needs eps > 0 and delta > 0, got eps = {}, delta = {}",
            params.eps, params.delta
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

/// One step of the configured scheme.
pub fn step(field: &Field, dt: f64, params: &ModelParams, config: &SolverConfig) -> Result<StepOutcome> {
    check_step_params(params, dt)?;
    let op = Operator::new(field.grid().clone(), params.clone());
    let (u, it, res) = theta_step(&op, field.values(), dt, config.scheme.theta(), config)?;
    Ok(StepOutcome { field: Field::new(field.grid().clone(), u)?, newton_iterations: it, residual: res })
}

/// One backward Euler step.
pub fn step_be(field: &Field, dt: f64, params: &ModelParams, config: &SolverConfig) -> Result<StepOutcome> {
    let cfg = SolverConfig { scheme: TimeScheme::BackwardEuler, ..config.clone() };
    step(field, dt, params, &cfg)
}

fn entropy_of(field: &Field, params: &ModelParams) -> Result<f64> {
    let kind = if params.eps > 0.0 { EntropyKind::Geps } else { EntropyKind::G0 };
    Ok(total_entropy(field, kind, params)?.value)
}

/// Integrate from `u0` to `config.t_end`.
///
/// Dissipation integrals are accumulated at the scheme's evaluation state
/// (the new level for backward Euler, the midpoint for the midpoint rule).
pub fn run(u0: &Field, params: &ModelParams, config: &SolverConfig) -> Result<Trajectory> {
    config.validate()?;
    check_step_params(params, config.initial_dt())?;
    let exps = config.exponents.unwrap_or_else(|| Exponents::for_n(params.n));
    let norms = weighted_norms(u0, exps.mu, exps.gamma)?;
    let e0 = energy(u0, 0.0);
    if ![norms.l2_mu, norms.grad_gamma, e0].iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("initial data has infinite weighted norms".into()));
    }
    let grid = u0.grid().clone();
    let op = Operator::new(Arc::clone(&grid), params.clone());
    let theta = config.scheme.theta();

    let (rec0, floor0) = diagnose(u0, params, &exps, 0.0, 0.0, 0.0)?;
    let mut traj = Trajectory {
        times: vec![0.0],
        diagnostics: vec![rec0],
        snapshots: vec![(0.0, u0.clone())],
        steps: Vec::new(),
        status: RunStatus::Completed,
        rejected_steps: 0,
        floor_events: floor0,
        final_field: u0.clone(),
    };

    let mut u = u0.values().to_vec();
    let mut t = 0.0;
    let mut dt = config.initial_dt();
    let mut energy_now = energy(u0, params.delta);
    let mut diss_e = 0.0;
    let mut diss_s = 0.0;
    let mut accepted = 0usize;
    let mut last_recorded = true;
    let mut last_snapped = true;

    while t < config.t_end {
        let remaining = config.t_end - t;
        let dt_try = if dt >= remaining * (1.0 - 1e-12) { remaining } else { dt };
        let attempt = theta_step(&op, &u, dt_try, theta, config);
        let (new_u, iters) = match attempt {
            Ok((v, it, _)) => (v, it),
            Err(Error::NewtonDiverged { .. } | Error::Singular { .. } | Error::Numerical(_)) => {
                traj.rejected_steps += 1;
                dt = 0.5 * dt_try;
                if dt < config.dt_min {
                    traj.status = RunStatus::NewtonFailure;
                    break;
                }
                continue;
            }
            Err(e) => return Err(e),
        };
        let new_field = Field::new(Arc::clone(&grid), new_u)?;
        let energy_new = energy(&new_field, params.delta);
        if config.energy_monotone && energy_new > energy_now + 10.0 * config.newton_tol {
            traj.rejected_steps += 1;
            dt = 0.5 * dt_try;
            if dt < config.dt_min {
                traj.status = RunStatus::NewtonFailure;
                break;
            }
            continue;
        }
        let state = blend(theta, new_field.values(), &u);
        diss_e += dt_try * op.energy_dissipation(&state);
        diss_s += dt_try * op.entropy_dissipation(&state);
        t = if dt_try == remaining { config.t_end } else { t + dt_try };
        u = new_field.values().to_vec();
        energy_now = energy_new;
        accepted += 1;

        traj.steps.push(StepRecord {
            t,
            dt: dt_try,
            newton_iterations: iters,
            energy_delta: energy_new,
            entropy: entropy_of(&new_field, params)?,
            min_u: new_field.min(),
            mass: crate::functionals::mass(&new_field),
        });

        last_recorded = accepted.is_multiple_of(config.output_stride);
        if last_recorded {
            let (rec, fl) = diagnose(&new_field, params, &exps, t, diss_e, diss_s)?;
            traj.times.push(t);
            traj.diagnostics.push(rec);
            traj.floor_events = traj.floor_events.max(fl);
        }
        last_snapped = config.snapshot_stride > 0 && accepted.is_multiple_of(config.snapshot_stride);
        if last_snapped {
            traj.snapshots.push((t, new_field.clone()));
        }
        traj.final_field = new_field;

        if traj.final_field.max_abs() > 1e6 {
            traj.status = RunStatus::BlowUp;
            break;
        }
        if iters <= 4 {
            dt = (dt_try * config.growth).min(config.dt_max);
        } else {
            dt = dt_try;
        }
    }

    if !last_recorded {
        let (rec, fl) = diagnose(&traj.final_field, params, &exps, t, diss_e, diss_s)?;
        traj.times.push(t);
        traj.diagnostics.push(rec);
        traj.floor_events = traj.floor_events.max(fl);
    }
    if !last_snapped && accepted > 0 {
        traj.snapshots.push((t, traj.final_field.clone()));
    }
    Ok(traj)
}
