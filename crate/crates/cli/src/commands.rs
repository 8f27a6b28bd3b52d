//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thinfilm_core::analysis::{
    fit_decay, functional_gap_constant, hardy_quotient_min, steady_residual, weak_residual, LogSteadyState,
    WindowPolicy,
};
use thinfilm_core::continuation::{
    build_report, member_config, mollify_initial, sweep_members, Coupling, SweepOptions, SweepParameter,
};
use thinfilm_core::timestepper::{run, RunStatus, Trajectory};
use thinfilm_core::{Field, Grid, ModelParams};

use crate::config::RunConfig;
use crate::error::{io_error, CliError};
use crate::output::{
    diag_json, ensure_dir, read_diag, read_profile, snapshot_files, snapshot_name, write_diag, write_json,
    write_profile,
};

fn status_name(status: RunStatus) -> &'static str {
    match status {
        RunStatus::Completed => "completed",
        RunStatus::NewtonFailure => "newton_failure",
        RunStatus::BlowUp => "blow_up",
    }
}

/// Write all run outputs into `dir` and return the summary document.
fn write_run(cfg: &RunConfig, dir: &Path, result: &Result<Trajectory, thinfilm_core::Error>) -> Result<Value, CliError> {
    let (status, error, final_diag, times, accepted, rejected, floor) = match result {
        Ok(traj) => {
            write_diag(&dir.join("diag.csv"), &traj.diagnostics)?;
            let mut times = Vec::new();
            if cfg.output.snapshots {
                for (k, (t, f)) in traj.snapshots.iter().enumerate() {
                    write_profile(&dir.join(snapshot_name(k)), f)?;
                    times.push(*t);
                }
            }
            (
                status_name(traj.status),
                Value::Null,
                diag_json(traj.last_diagnostics()),
                times,
                traj.steps.len(),
                traj.rejected_steps,
                traj.floor_events,
            )
        }
        Err(e) => ("error", Value::String(e.to_string()), Value::Null, Vec::new(), 0, 0, 0),
    };

    let mut decay = Value::Null;
    let mut decay_error = Value::Null;
    if let (true, Ok(traj)) = (cfg.analysis.decay_fit, result) {
        let series: Vec<(f64, f64)> = traj.diagnostics.iter().map(|d| (d.t, d.energy_0)).collect();
        match fit_decay(&series, WindowPolicy::Default) {
            Ok(fit) => {
                decay = serde_json::to_value(fit).map_err(|e| CliError::Numerical(e.to_string()))?;
                decay["max_excess"] = json!(fit.max_excess(&series));
            }
            Err(e) => decay_error = Value::String(e.to_string()),
        }
    }

    let summary = json!({
        "status": status,
        "error": error,
        "config": cfg,
        "final": final_diag,
        "decay_fit": decay,
        "decay_fit_error": decay_error,
        "snapshot_times": times,
        "steps": { "accepted": accepted, "rejected": rejected },
        "entropy_floor_events": floor,
    });
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn initial_for(cfg: &RunConfig) -> Result<Field, CliError> {
    let u0 = cfg.initial_field()?;
    let p = cfg.params();
    Ok(if cfg.initial.mollify { mollify_initial(&u0, p.eps, p.theta) } else { u0 })
}

fn check_status(summary: &Value) -> Result<(), CliError> {
    match summary["status"].as_str() {
        Some("completed") => Ok(()),
        other => Err(CliError::Numerical(format!(
            "run ended with status {}{}",
            other.unwrap_or("unknown"),
            summary["error"].as_str().map(|e| format!(": {e}")).unwrap_or_default()
        ))),
    }
}

pub fn cmd_run(config: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(o) = out {
        cfg.output.dir = o;
    }
    ensure_dir(&cfg.output.dir)?;
    let u0 = initial_for(&cfg)?;
    let result = run(&u0, &cfg.params(), &cfg.solver_config());
    if let Err(e @ (thinfilm_core::Error::Config(_) | thinfilm_core::Error::Domain(_))) = &result {
        return Err(CliError::Config(e.to_string()));
    }
    let summary = write_run(&cfg, &cfg.output.dir, &result)?;
    check_status(&summary)
}

pub struct SweepArgs {
    pub config: PathBuf,
    pub param: SweepParameter,
    pub values: Vec<f64>,
    pub workers: Option<usize>,
    pub coupling: Coupling,
    pub out: Option<PathBuf>,
}

pub fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let mut base = RunConfig::load(&args.config)?;
    if let Some(o) = args.out {
        base.output.dir = o;
    }
    let u0 = base.initial_field()?;
    let members = sweep_members(&u0, &base.params(), args.param, &args.values, args.coupling)?;
    let solver = member_config(&base.solver_config());
    let tag = match args.param {
        SweepParameter::Eps => "eps",
        SweepParameter::Delta => "delta",
    };
    let mut member_cfgs = Vec::with_capacity(members.len());
    for (k, m) in members.iter().enumerate() {
        let mut c = base.clone();
        c.model.eps = m.params.eps;
        c.model.delta = m.params.delta;
        c.initial.mollify = true;
        c.output.dir = base.output.dir.join(format!("{tag}_{k:02}"));
        c.output.snapshots = true;
        ensure_dir(&c.output.dir)?;
        member_cfgs.push(c);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    let runs: Vec<Result<Trajectory, thinfilm_core::Error>> =
        pool.install(|| members.par_iter().map(|m| run(&m.u0, &m.params, &solver)).collect());
    for (c, r) in member_cfgs.iter().zip(&runs) {
        write_run(c, &c.output.dir, r)?;
    }

    let options = SweepOptions { coupling: args.coupling, exponents: Some(base.exponents()), ..SweepOptions::default() };
    let report = build_report(&members, &runs, args.param, solver.t_end, options)?;
    write_json(&base.output.dir.join("report.json"), &report)?;
    if report.complete {
        Ok(())
    } else {
        Err(CliError::Numerical("at least one sweep member failed; see report.json".into()))
    }
}

fn emit(value: &impl Serialize, dest: Option<PathBuf>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    println!("{text}");
    if let Some(path) = dest {
        if let Some(parent) = path.parent() {
            ensure_dir(parent)?;
        }
        write_json(&path, value)?;
    }
    Ok(())
}

pub fn cmd_hardy(gamma: f64, cells: &[usize], delta: f64, out: Option<PathBuf>) -> Result<(), CliError> {
    if cells.is_empty() {
        return Err(CliError::Config("--N needs at least one grid size".into()));
    }
    let mut rows = Vec::new();
    for &n in cells {
        let q = hardy_quotient_min(gamma, n)?;
        let gap = functional_gap_constant(n, delta)?;
        rows.push(json!({ "N": n, "hardy_min": q, "functional_gap_constant": gap }));
    }
    let value = json!({ "gamma": gamma, "delta": delta, "results": rows });
    emit(&value, out.map(|d| d.join("hardy.json")))
}

pub fn cmd_decay(input: &Path, window: Option<(f64, f64)>, out: Option<PathBuf>) -> Result<(), CliError> {
    let rows = read_diag(input)?;
    let series: Vec<(f64, f64)> = rows.iter().map(|d| (d.t, d.energy_0)).collect();
    let policy = match window {
        Some((t_start, t_end)) => WindowPolicy::Explicit { t_start, t_end },
        None => WindowPolicy::Default,
    };
    let fit = fit_decay(&series, policy)?;
    let mut value = serde_json::to_value(fit).map_err(|e| CliError::Numerical(e.to_string()))?;
    value["max_excess"] = json!(fit.max_excess(&series));
    let dest = out.unwrap_or_else(|| input.parent().map(Path::to_path_buf).unwrap_or_default());
    emit(&value, Some(dest.join("decay.json")))
}

pub struct SteadyArgs {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub cells: usize,
    pub n: f64,
    pub eps: f64,
    pub delta: f64,
    pub margin: Option<f64>,
    pub out: Option<PathBuf>,
}

pub fn cmd_steady(a: SteadyArgs) -> Result<(), CliError> {
    let state = LogSteadyState::new(a.c1, a.c2, a.c3)?;
    let grid = Arc::new(Grid::new(a.cells)?);
    let margin = a.margin.unwrap_or(4.0 * grid.h());
    let field = state.on_grid(grid.clone(), grid.h().min(margin))?;
    let params = ModelParams::new(a.n, a.eps, a.delta);
    params.validate()?;
    let residual = steady_residual(&field, &params, margin)?;
    let value = json!({
        "c1": a.c1, "c2": a.c2, "c3": a.c3,
        "c3_lower_bound": state.c3_lower_bound(),
        "N": a.cells, "margin": margin,
        "residual": residual,
    });
    emit(&value, a.out.map(|d| d.join("steady.json")))
}

pub fn cmd_weak(run_dir: &Path, k: usize) -> Result<(), CliError> {
    let summary_path = run_dir.join("summary.json");
    let text = std::fs::read_to_string(&summary_path).map_err(|e| io_error(&summary_path, e))?;
    let summary: Value = serde_json::from_str(&text).map_err(|e| io_error(&summary_path, e))?;
    let mut cfg: RunConfig = serde_json::from_value(summary["config"].clone())
        .map_err(|e| CliError::Config(format!("{}: bad config block: {e}", summary_path.display())))?;
    cfg.resolve()?;
    let times: Vec<f64> = serde_json::from_value(summary["snapshot_times"].clone())
        .map_err(|e| CliError::Config(format!("{}: bad snapshot_times: {e}", summary_path.display())))?;
    let files = snapshot_files(run_dir)?;
    if files.len() != times.len() {
        return Err(CliError::Config(format!(
            "{}: {} snapshot files but {} snapshot times",
            run_dir.display(),
            files.len(),
            times.len()
        )));
    }
    let grid = Arc::new(Grid::new(cfg.grid.cells)?);
    let mut snaps = Vec::with_capacity(files.len());
    for (t, f) in times.iter().zip(&files) {
        let (_, u) = read_profile(f)?;
        snaps.push((*t, Field::new(grid.clone(), u)?));
    }
    let residual = weak_residual(&snaps, &cfg.params(), k)?;
    let value = json!({ "k": k, "snapshots": snaps.len(), "weak_residual": residual });
    emit(&value, Some(run_dir.join("weak.json")))
}
