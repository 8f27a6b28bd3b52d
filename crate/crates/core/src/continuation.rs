//! Vanishing-regularization experiments: mollified data, parameter sweeps and
//! the entropy gap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{holder_seminorm_x, total_entropy, weighted_sup_difference, EntropyKind, Exponents};
use crate::model::{Field, ModelParams};
use crate::timestepper::{run, RunStatus, SolverConfig, Trajectory};

/// Lift `u0` by `eps^theta`.
pub fn mollify_initial(u0: &Field, eps: f64, theta: f64) -> Field {
    if eps == 0.0 {
        return u0.clone();
    }
    let lift = eps.powf(theta);
    u0.map(|u| u + lift)
}

/// `|int G_0(u) - int G_eps(u)|` for already mollified data.
pub fn entropy_gap(u0: &Field, params: &ModelParams) -> Result<f64> {
    let g0 = total_entropy(u0, EntropyKind::G0, params)?.value;
    let ge = total_entropy(u0, EntropyKind::Geps, params)?.value;
    Ok((g0 - ge).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Eps,
    Delta,
}

/// How `eps` follows `delta` in a delta sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `eps = delta^2`.
    #[default]
    Square,
    /// Keep the base `eps`.
    Fixed,
}

impl Coupling {
    pub fn eps_for(self, delta: f64, base_eps: f64) -> f64 {
        match self {
            Coupling::Square => delta * delta,
            Coupling::Fixed => base_eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberOutcome {
    pub value: f64,
    pub eps: f64,
    pub delta: f64,
    /// Solver status, or `None` if the run returned an error.
    pub status: Option<RunStatus>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Present for delta sweeps.
    pub coupling: Option<Coupling>,
    pub matched_times: Vec<f64>,
    /// Weighted sup distance between consecutive members, maximized over the matched times.
    pub distances: Vec<f64>,
    /// Hölder constant in `x`, maximized over the matched times.
    pub holder_constants: Vec<f64>,
    /// Entropy gaps of the mollified data (eps sweeps only).
    pub gaps: Vec<f64>,
    /// Log-log slopes of the gap between consecutive eps values.
    pub gap_rates: Vec<f64>,
    /// Least-squares log-log slope over all eps values.
    pub gap_rate_fit: Option<f64>,
    pub members: Vec<MemberOutcome>,
    pub complete: bool,
}

/// Options for [`run_sequence`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub coupling: Coupling,
    /// Number of matched-time intervals over `[0, t_end]`.
    pub matched_intervals: usize,
    pub exponents: Option<Exponents>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { coupling: Coupling::Square, matched_intervals: 10, exponents: None }
    }
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn member_params(base: &ModelParams, parameter: SweepParameter, value: f64, coupling: Coupling) -> ModelParams {
    let mut p = base.clone();
    match parameter {
        SweepParameter::Eps => p.eps = value,
        SweepParameter::Delta => {
            p.delta = value;
            p.eps = coupling.eps_for(value, base.eps);
        }
    }
    p
}

/// One sweep member: its parameters and mollified initial data.
#[derive(Debug, Clone)]
pub struct SweepMember {
    pub value: f64,
    pub params: ModelParams,
    pub u0: Field,
}

/// Validate the sweep and build its members.
pub fn sweep_members(
    u0: &Field,
    params: &ModelParams,
    parameter: SweepParameter,
    values: &[f64],
    coupling: Coupling,
) -> Result<Vec<SweepMember>> {
    if values.is_empty() || values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Config("sweep values must be positive and finite".into()));
    }
    if values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("sweep values must be strictly decreasing".into()));
    }
    values
        .iter()
        .map(|&value| {
            let p = member_params(params, parameter, value, coupling);
            p.validate()?;
            let u = mollify_initial(u0, p.eps, p.theta);
            Ok(SweepMember { value, params: p, u0: u })
        })
        .collect()
}

/// Solver settings for sweep members: snapshots are needed for matched times.
pub fn member_config(config: &SolverConfig) -> SolverConfig {
    if config.snapshot_stride == 0 {
        SolverConfig { snapshot_stride: 1, ..config.clone() }
    } else {
        config.clone()
    }
}

/// Compare finished member runs and assemble the report.
pub fn build_report(
    members: &[SweepMember],
    runs: &[Result<Trajectory>],
    parameter: SweepParameter,
    t_end: f64,
    options: SweepOptions,
) -> Result<ConvergenceReport> {
    if members.len() != runs.len() || members.is_empty() {
        return Err(Error::LengthMismatch { expected: members.len(), got: runs.len() });
    }
    if options.matched_intervals == 0 {
        return Err(Error::Config("need at least one matched-time interval".into()));
    }
    let exps = options.exponents.unwrap_or_else(|| Exponents::for_n(members[0].params.n));
    let k = options.matched_intervals;
    let matched: Vec<f64> = (0..=k).map(|i| t_end * i as f64 / k as f64).collect();

    let mut outcomes = Vec::with_capacity(members.len());
    let mut complete = true;
    for (m, r) in members.iter().zip(runs) {
        let (status, error) = match r {
            Ok(t) => (Some(t.status), None),
            Err(e) => (None, Some(e.to_string())),
        };
        complete &= status == Some(RunStatus::Completed);
        outcomes.push(MemberOutcome { value: m.value, eps: m.params.eps, delta: m.params.delta, status, error });
    }

    let sampled: Vec<Option<Vec<Field>>> = runs
        .iter()
        .map(|r| match r {
            Ok(t) if t.status == RunStatus::Completed => matched.iter().map(|&s| t.field_at(s)).collect(),
            _ => None,
        })
        .collect();

    let mut holder_constants = Vec::new();
    for s in sampled.iter().flatten() {
        holder_constants.push(s.iter().map(|f| holder_seminorm_x(f, exps.beta, exps.alpha)).fold(0.0, f64::max));
    }
    let mut distances = Vec::new();
    for w in sampled.windows(2) {
        if let (Some(a), Some(b)) = (&w[0], &w[1]) {
            let mut d: f64 = 0.0;
            for (fa, fb) in a.iter().zip(b) {
                d = d.max(weighted_sup_difference(fa, fb, exps.beta)?);
            }
            distances.push(d);
        }
    }

    let values: Vec<f64> = members.iter().map(|m| m.value).collect();
    let (gaps, gap_rates, gap_rate_fit) = if parameter == SweepParameter::Eps {
        let gaps = members.iter().map(|m| entropy_gap(&m.u0, &m.params)).collect::<Result<Vec<_>>>()?;
        let rates = values
            .windows(2)
            .zip(gaps.windows(2))
            .filter_map(|(v, g)| log_log_slope(v, g))
            .collect();
        let fit = log_log_slope(&values, &gaps);
        (gaps, rates, fit)
    } else {
        (Vec::new(), Vec::new(), None)
    };

    let report = ConvergenceReport {
        parameter,
        values,
        coupling: (parameter == SweepParameter::Delta).then_some(options.coupling),
        matched_times: matched,
        distances,
        holder_constants,
        gaps,
        gap_rates,
        gap_rate_fit,
        members: outcomes,
        complete,
    };
    let finite = report.distances.iter().chain(&report.holder_constants).chain(&report.gaps).all(|v| v.is_finite());
    if !finite {
        return Err(Error::Numerical("sweep produced non-finite entries".into()));
    }
    Ok(report)
}

/// Run the solver for each parameter value from correspondingly mollified
/// data and compare consecutive members. Members run concurrently.
pub fn run_sequence(
    u0: &Field,
    params: &ModelParams,
    config: &SolverConfig,
    parameter: SweepParameter,
    values: &[f64],
    options: SweepOptions,
) -> Result<ConvergenceReport> {
    config.validate()?;
    let members = sweep_members(u0, params, parameter, values, options.coupling)?;
    let cfg = member_config(config);
    let runs: Vec<Result<Trajectory>> = members.par_iter().map(|m| run(&m.u0, &m.params, &cfg)).collect();
    build_report(&members, &runs, parameter, config.t_end, options)
}
