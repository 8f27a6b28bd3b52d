//! TOML run configuration. Every field has a default so that the resolved
//! configuration can be written back out in full.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thinfilm_core::functionals::Exponents;
use thinfilm_core::timestepper::{SolverConfig, TimeScheme};
use thinfilm_core::{Drift, Field, Grid, MobilityMode, ModelParams};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub n: f64,
    pub eps: f64,
    pub delta: f64,
    pub anchor: f64,
    /// Defaults to the admissible value for `n`.
    pub theta: Option<f64>,
    pub mobility: MobilityMode,
    pub drift: Option<Drift>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { n: 2.0, eps: 1e-6, delta: 1e-3, anchor: 1.0, theta: None, mobility: MobilityMode::Entropy, drift: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    #[serde(rename = "N")]
    pub cells: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { cells: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub t_end: f64,
    pub dt0: Option<f64>,
    pub dt_min: f64,
    pub dt_max: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub energy_monotone: bool,
    pub scheme: TimeScheme,
    pub growth: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::new(1.0);
        Self {
            t_end: s.t_end,
            dt0: None,
            dt_min: s.dt_min,
            dt_max: s.dt_max,
            newton_tol: s.newton_tol,
            newton_max_iter: s.newton_max_iter,
            energy_monotone: s.energy_monotone,
            scheme: s.scheme,
            growth: s.growth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    Flat,
    Cosine,
    Bump,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub kind: InitialKind,
    pub amplitude: f64,
    pub offset: f64,
    pub path: Option<PathBuf>,
    /// Lift the data by `eps^theta` before running.
    pub mollify: bool,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self { kind: InitialKind::Cosine, amplitude: 0.1, offset: 1.0, path: None, mollify: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Accepted steps between diagnostic rows (and snapshots).
    pub stride: usize,
    pub snapshots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), stride: 10, snapshots: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub beta: Option<f64>,
    pub mu: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub decay_fit: bool,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self { beta: None, mu: None, gamma: None, alpha: None, decay_fit: true }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub initial: InitialSection,
    pub output: OutputSection,
    pub analysis: AnalysisSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // relative data paths are taken relative to the config file
        if let (Some(p), Some(base)) = (&cfg.initial.path, path.parent()) {
            if p.is_relative() {
                cfg.initial.path = Some(base.join(p));
            }
        }
        cfg.resolve()?;
        Ok(cfg)
    }

    /// Fill derived defaults and validate everything.
    pub fn resolve(&mut self) -> Result<(), CliError> {
        if self.model.theta.is_none() {
            self.model.theta = Some(ModelParams::default_theta(self.model.n));
        }
        if self.solver.dt0.is_none() {
            self.solver.dt0 = Some(1e-6 * self.solver.t_end);
        }
        let d = Exponents::for_n(self.model.n);
        self.analysis.beta.get_or_insert(d.beta);
        self.analysis.mu.get_or_insert(d.mu);
        self.analysis.gamma.get_or_insert(d.gamma);
        self.analysis.alpha.get_or_insert(d.alpha);
        self.params().validate()?;
        self.solver_config().validate()?;
        self.exponents().validate(self.model.n)?;
        Grid::new(self.grid.cells)?;
        if self.output.stride == 0 {
            return Err(CliError::Config("output.stride must be at least 1".into()));
        }
        if self.initial.kind == InitialKind::File && self.initial.path.is_none() {
            return Err(CliError::Config("initial.kind = \"file\" needs initial.path".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> ModelParams {
        let m = &self.model;
        ModelParams {
            n: m.n,
            eps: m.eps,
            delta: m.delta,
            anchor: m.anchor,
            theta: m.theta.unwrap_or_else(|| ModelParams::default_theta(m.n)),
            mobility: m.mobility,
            drift: m.drift,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            t_end: s.t_end,
            dt0: s.dt0,
            dt_min: s.dt_min,
            dt_max: s.dt_max,
            newton_tol: s.newton_tol,
            newton_max_iter: s.newton_max_iter,
            output_stride: self.output.stride,
            snapshot_stride: if self.output.snapshots { self.output.stride } else { 0 },
            energy_monotone: s.energy_monotone,
            scheme: s.scheme,
            growth: s.growth,
            exponents: Some(self.exponents()),
        }
    }

    pub fn exponents(&self) -> Exponents {
        let d = Exponents::for_n(self.model.n);
        let a = &self.analysis;
        Exponents {
            beta: a.beta.unwrap_or(d.beta),
            mu: a.mu.unwrap_or(d.mu),
            gamma: a.gamma.unwrap_or(d.gamma),
            alpha: a.alpha.unwrap_or(d.alpha),
        }
    }

    /// Initial field before any mollification.
    pub fn initial_field(&self) -> Result<Field, CliError> {
        let grid = Arc::new(Grid::new(self.grid.cells)?);
        let (a, c) = (self.initial.amplitude, self.initial.offset);
        let field = match self.initial.kind {
            InitialKind::Flat => Field::constant(grid, c)?,
            InitialKind::Cosine => Field::from_fn(grid, |x| c + a * (PI * x).cos())?,
            InitialKind::Bump => Field::from_fn(grid, |x| c + a * (1.0 - 4.0 * x * x).max(0.0).powi(2))?,
            InitialKind::File => {
                let path = self.initial.path.as_ref().expect("checked in resolve");
                let (x, u) = crate::output::read_profile(path)?;
                let same = x.len() == grid.len() && x.iter().zip(grid.nodes()).all(|(a, b)| (a - b).abs() <= 1e-12);
                if !same {
                    return Err(CliError::Config(format!(
                        "{} does not sample the configured grid with N = {}",
                        path.display(),
                        self.grid.cells
                    )));
                }
                Field::new(grid, u)?
            }
        };
        if field.min() < 0.0 {
            return Err(CliError::Config("initial data must be nonnegative".into()));
        }
        Ok(field)
    }
}
