//! Equation parameters and the discrete solution field.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Face average used for the mobility `|u|^n + eps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MobilityMode {
    /// `(u_r - u_l) / (G'(u_r) - G'(u_l))`, the mean that makes the discrete
    /// entropy identity exact.
    #[default]
    Entropy,
    Arithmetic,
}

/// Gravity, rotation and surface-tension coefficients of the full
/// coating-flow model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Include the `2 u_x` part of the full curvature.
    #[serde(default)]
    pub full_curvature: bool,
}

impl Default for Drift {
    fn default() -> Self {
        Self { a: 0.0, b: 0.0, c: 1.0, full_curvature: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: f64,
    pub eps: f64,
    pub delta: f64,
    /// Entropy anchor `A > 0`: `G(A) = G'(A) = 0`.
    pub anchor: f64,
    /// Mollification exponent: initial data are lifted by `eps^theta`.
    pub theta: f64,
    #[serde(default)]
    pub mobility: MobilityMode,
    #[serde(default)]
    pub drift: Option<Drift>,
}

impl ModelParams {
    pub fn new(n: f64, eps: f64, delta: f64) -> Self {
        Self {
            n,
            eps,
            delta,
            anchor: 1.0,
            theta: Self::default_theta(n),
            mobility: MobilityMode::Entropy,
            drift: None,
        }
    }

    /// Half of the admissible upper bound `1 / (2 (n - 1))`, capped at 1/4.
    pub fn default_theta(n: f64) -> f64 {
        if n > 1.0 {
            (0.25 / (n - 1.0)).min(0.25)
        } else {
            0.25
        }
    }

    /// Upper bound of the admissible mollification window, `None` when
    /// unbounded for the given `n`.
    pub fn theta_bound(n: f64) -> (f64, bool) {
        if n > 1.0 {
            (1.0 / (2.0 * (n - 1.0)), false)
        } else if n == 1.0 {
            (0.5, true)
        } else {
            (1.0, true)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.n > 0.0 && self.n.is_finite()) {
            return bad(format!("mobility exponent n must be positive, got {}", self.n));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be non-negative, got {}", self.eps));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be non-negative, got {}", self.delta));
        }
        if !(self.anchor > 0.0 && self.anchor.is_finite()) {
            return bad(format!("entropy anchor must be positive, got {}", self.anchor));
        }
        let (hi, closed) = Self::theta_bound(self.n);
        let ok = self.theta > 0.0 && if closed { self.theta <= hi } else { self.theta < hi };
        if !ok {
            let close = if closed { ']' } else { ')' };
            return bad(format!("theta = {} outside (0, {hi}{close} for n = {}", self.theta, self.n));
        }
        if let Some(d) = &self.drift {
            if ![d.a, d.b, d.c].iter().all(|v| v.is_finite()) {
                return bad("drift coefficients must be finite".into());
            }
        }
        Ok(())
    }

    /// Pointwise mobility `|u|^n + eps`.
    #[inline]
    pub fn mobility(&self, u: f64) -> f64 {
        u.abs().powf(self.n) + self.eps
    }

    /// Derivative of [`Self::mobility`] in `u`.
    #[inline]
    pub fn mobility_derivative(&self, u: f64) -> f64 {
        if u == 0.0 {
            if self.n > 1.0 { 0.0 } else if self.n == 1.0 { 1.0 } else { f64::INFINITY }
        } else {
            self.n * u.abs().powf(self.n - 1.0) * u.signum()
        }
    }

    pub fn drift_or_default(&self) -> Drift {
        self.drift.unwrap_or_default()
    }
}

/// Film thickness sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    u: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, u: Vec<f64>) -> Result<Self> {
        if u.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: u.len() });
        }
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, u })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let u = grid.nodes().iter().map(|&x| f(x)).collect();
        Self::new(grid, u)
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![c; n])
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn into_values(self) -> Vec<f64> {
        self.u
    }

    pub fn min(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `u(x) -> u(-x)`.
    pub fn reflected(&self) -> Self {
        let mut u = self.u.clone();
        u.reverse();
        Self { grid: self.grid.clone(), u }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), u: self.u.iter().map(|&v| f(v)).collect() }
    }
}
