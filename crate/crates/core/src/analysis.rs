//! Long-time asymptotics, steady states and weak-form checks.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{weight, Grid};
use crate::model::{Field, ModelParams};
use crate::operator::apply_operator;

fn smallest_generalized_eigenvalue(k: DMatrix<f64>, m_diag: &[f64]) -> Result<f64> {
    let n = m_diag.len();
    if m_diag.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
        return Err(Error::Numerical("mass matrix is not positive definite".into()));
    }
    let s: Vec<f64> = m_diag.iter().map(|m| 1.0 / m.sqrt()).collect();
    let a = DMatrix::from_fn(n, n, |i, j| s[i] * k[(i, j)] * s[j]);
    let eig = SymmetricEigen::try_new(a, 1e-14, 10_000)
        .ok_or_else(|| Error::Numerical("symmetric eigen-solver did not converge".into()))?;
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::Numerical(format!("non-positive minimum quotient {min}")));
    }
    Ok(min)
}

fn check_size(cells: usize) -> Result<Grid> {
    if cells < 16 {
        return Err(Error::Config(format!("need N >= 16, got {cells}")));
    }
    Grid::new(cells)
}

/// Minimum of `int (1-x^2)^gamma v_x^2 / int (1-x^2)^(gamma-2) v^2` over grid
/// functions vanishing at both endpoints.
pub fn hardy_quotient_min(gamma: f64, cells: usize) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    let grid = check_size(cells)?;
    let h = grid.h();
    let m = cells - 1;
    let wf: Vec<f64> = grid.faces().iter().map(|&x| (1.0 - x * x).powf(gamma) / h).collect();
    let mut k = DMatrix::zeros(m, m);
    for (f, &c) in wf.iter().enumerate() {
        // face f joins nodes f and f + 1; interior unknown j is node j + 1
        let (l, r) = (f.checked_sub(1), if f < m { Some(f) } else { None });
        if let Some(l) = l {
            k[(l, l)] += c;
        }
        if let Some(r) = r {
            k[(r, r)] += c;
        }
        if let (Some(l), Some(r)) = (l, r) {
            k[(l, r)] -= c;
            k[(r, l)] -= c;
        }
    }
    let x = grid.nodes();
    let w = grid.trapezoid_weights();
    let mass: Vec<f64> = (1..cells).map(|i| w[i] * (1.0 - x[i] * x[i]).powf(gamma - 2.0)).collect();
    smallest_generalized_eigenvalue(k, &mass)
}

/// Minimum over grid functions of `int [(w_delta u_x)_x]^2 / (2 E_0(u))`, with
/// the same discrete derivatives the evolution operator uses.
pub fn functional_gap_constant(cells: usize, delta: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(Error::Config(format!("delta must be nonnegative, got {delta}")));
    }
    let grid = check_size(cells)?;
    let h = grid.h();
    let om = grid.trapezoid_weights();
    let wd: Vec<f64> = grid.faces().iter().map(|&x| weight(x, delta)).collect();
    // unknowns are face slopes y_f; numerator sum_i (s_i - s_{i-1})^2 / omega_i with s = w y
    let mut k = DMatrix::zeros(cells, cells);
    for i in 0..=cells {
        let inv = 1.0 / om[i];
        let right = (i < cells).then_some(i);
        let left = i.checked_sub(1);
        if let Some(r) = right {
            k[(r, r)] += inv * wd[r] * wd[r];
        }
        if let Some(l) = left {
            k[(l, l)] += inv * wd[l] * wd[l];
        }
        if let (Some(l), Some(r)) = (left, right) {
            k[(l, r)] -= inv * wd[l] * wd[r];
            k[(r, l)] -= inv * wd[l] * wd[r];
        }
    }
    let mass: Vec<f64> = grid.faces().iter().map(|&x| h * weight(x, 0.0)).collect();
    smallest_generalized_eigenvalue(k, &mass)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindowPolicy {
    /// From the first sample at or below half the initial value (the first
    /// sample if there is none) to the last sample at or above `1e-12` times it.
    #[default]
    Default,
    Explicit { t_start: f64, t_end: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    #[serde(rename = "A_fit")]
    pub a_fit: f64,
    #[serde(rename = "B_fit")]
    pub b_fit: f64,
    pub rmse: f64,
    pub window: [f64; 2],
    pub samples: usize,
    /// Nonpositive values inside the window that were left out.
    pub skipped: usize,
}

impl DecayFit {
    pub fn bound(&self, t: f64) -> f64 {
        self.a_fit * (-self.b_fit * t).exp()
    }

    /// Largest `E(t) / (A e^{-B t})` over samples in the window.
    pub fn max_excess(&self, series: &[(f64, f64)]) -> f64 {
        series
            .iter()
            .filter(|(t, _)| *t >= self.window[0] && *t <= self.window[1])
            .map(|&(t, e)| e / self.bound(t))
            .fold(0.0, f64::max)
    }
}

/// Least-squares fit of `ln E = ln A - B t` over a window of the series.
pub fn fit_decay(series: &[(f64, f64)], policy: WindowPolicy) -> Result<DecayFit> {
    if series.is_empty() {
        return Err(Error::Numerical("empty series".into()));
    }
    let (t_start, t_end) = match policy {
        WindowPolicy::Explicit { t_start, t_end } => (t_start, t_end),
        WindowPolicy::Default => {
            let e0 = series[0].1;
            let start = series.iter().find(|(_, e)| *e <= 0.5 * e0).unwrap_or(&series[0]).0;
            let end = series
                .iter()
                .rev()
                .find(|(_, e)| *e >= 1e-12 * e0)
                .map(|p| p.0)
                .ok_or_else(|| Error::Numerical("no sample above the lower cutoff".into()))?;
            (start, end)
        }
    };
    let mut pts = Vec::new();
    let mut skipped = 0;
    for &(t, e) in series.iter().filter(|(t, _)| *t >= t_start && *t <= t_end) {
        if e > 0.0 && e.is_finite() {
            pts.push((t, e.ln()));
        } else {
            skipped += 1;
        }
    }
    if pts.len() < 10 {
        return Err(Error::Numerical(format!(
            "decay window [{t_start}, {t_end}] holds {} usable samples, need 10",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    // center the abscissae so that the fit is insensitive to time shifts
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Numerical("decay window spans a single time".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let rmse = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(DecayFit { a_fit: intercept.exp(), b_fit: -slope, rmse, window: [t_start, t_end], samples: pts.len(), skipped })
}

/// `u_s = (c1 + c2) ln(1 + x) + (c1 - c2) ln(1 - x) + c3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogSteadyState {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl LogSteadyState {
    /// Checks `|c2| <= -c1` and that the profile is nonnegative on (-1, 1).
    pub fn new(c1: f64, c2: f64, c3: f64) -> Result<Self> {
        if ![c1, c2, c3].iter().all(|v| v.is_finite()) || c2.abs() > -c1 {
            return Err(Error::Domain(format!("need |c2| <= -c1, got c1 = {c1}, c2 = {c2}")));
        }
        let s = Self { c1, c2, c3 };
        let lb = s.c3_lower_bound();
        if c3 < lb {
            return Err(Error::Domain(format!("c3 = {c3} is below the nonnegativity bound {lb}")));
        }
        Ok(s)
    }

    /// Smallest `c3` keeping the profile nonnegative. The minimum sits at
    /// `x = c2 / c1`; when `|c2| = -c1` it sits at an endpoint where the
    /// profile may go to minus infinity, so the bound is infinite there.
    pub fn c3_lower_bound(&self) -> f64 {
        let (c1, c2) = (self.c1, self.c2);
        if c1 == 0.0 {
            return 0.0;
        }
        let r = c2 / c1;
        if r.abs() >= 1.0 {
            // one log term vanishes; the other has a nonpositive coefficient
            return if c2 == 0.0 { 0.0 } else { f64::INFINITY };
        }
        -(c1 + c2) * (1.0 + r).ln() - (c1 - c2) * (1.0 - r).ln()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let a = self.c1 + self.c2;
        let b = self.c1 - self.c2;
        let term = |c: f64, y: f64| if c == 0.0 { 0.0 } else { c * y.ln() };
        term(a, 1.0 + x) + term(b, 1.0 - x) + self.c3
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.c1 + self.c2) / (1.0 + x) - (self.c1 - self.c2) / (1.0 - x)
    }

    /// Grid field with `|x|` clamped to `1 - margin` (margin > 0), so the
    /// values are exact on the subdomain and finite at the endpoints.
    pub fn on_grid(&self, grid: std::sync::Arc<Grid>, margin: f64) -> Result<Field> {
        if !(margin > 0.0 && margin < 1.0) {
            return Err(Error::Config(format!("margin must lie in (0, 1), got {margin}")));
        }
        let lim = 1.0 - margin;
        Field::from_fn(grid, |x| self.eval(x.clamp(-lim, lim)))
    }
}

/// Largest `|F(u)|` over nodes with `|x| <= 1 - margin`.
pub fn steady_residual(field: &Field, params: &ModelParams, margin: f64) -> Result<f64> {
    let r = apply_operator(field, params)?;
    let x = field.grid().nodes();
    Ok(r.iter()
        .zip(x)
        .filter(|(_, &x)| x.abs() <= 1.0 - margin + 1e-12)
        .fold(0.0, |a, (v, _)| a.max(v.abs())))
}

/// Legendre polynomial and its derivative.
pub fn legendre(j: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if j == 0 {
        return (1.0, 0.0);
    }
    for k in 1..j {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    // P_j' from the three-term identity; at x = +-1 use the closed form
    let jf = j as f64;
    let d = if (1.0 - x * x).abs() < 1e-14 {
        x.signum().powi(j as i32 + 1) * jf * (jf + 1.0) / 2.0
    } else {
        jf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, d)
}

/// Nodal flux density `w (|u|^n + eps) (w u_x)_xx` from centered differences.
fn centered_flux(u: &[f64], grid: &Grid, params: &ModelParams) -> Vec<f64> {
    let n = u.len();
    let h = grid.h();
    let x = grid.nodes();
    let d1 = |f: &[f64], i: usize| -> f64 {
        if i == 0 {
            (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
        } else if i == n - 1 {
            (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h)
        } else {
            (f[i + 1] - f[i - 1]) / (2.0 * h)
        }
    };
    let v: Vec<f64> = (0..n).map(|i| weight(x[i], params.delta) * d1(u, i)).collect();
    let vxx = |i: usize| -> f64 {
        if i == 0 {
            (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h)
        } else if i == n - 1 {
            (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / (h * h)
        } else {
            (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h)
        }
    };
    (0..n).map(|i| weight(x[i], params.delta) * params.mobility(u[i]) * vxx(i)).collect()
}

/// Weak-form defect of a trajectory for one separable test function
/// `phi(x, t) = p(x) q(t)`, where `p` returns value and derivative.
pub fn weak_pairing(
    snaps: &[(f64, Field)],
    params: &ModelParams,
    p: impl Fn(f64) -> (f64, f64),
    q: impl Fn(f64) -> f64,
) -> Result<f64> {
    if snaps.len() < 2 {
        return Err(Error::Numerical("weak residual needs at least two snapshots".into()));
    }
    let grid = snaps[0].1.grid().clone();
    if grid.len() < 4 {
        return Err(Error::Numerical("grid too small".into()));
    }
    let x = grid.nodes();
    let pv: Vec<(f64, f64)> = x.iter().map(|&x| p(x)).collect();
    let pval: Vec<f64> = pv.iter().map(|v| v.0).collect();
    let pder: Vec<f64> = pv.iter().map(|v| v.1).collect();
    let mut a = Vec::with_capacity(snaps.len());
    let mut b = Vec::with_capacity(snaps.len());
    for (_, f) in snaps {
        let u = f.values();
        a.push(grid.quadrature(&u.iter().zip(&pval).map(|(u, p)| u * p).collect::<Vec<_>>())?);
        let flux = centered_flux(u, &grid, params);
        b.push(grid.quadrature(&flux.iter().zip(&pder).map(|(f, p)| f * p).collect::<Vec<_>>())?);
    }
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for m in 0..snaps.len() - 1 {
        let (t0, t1) = (snaps[m].0, snaps[m + 1].0);
        let dt = t1 - t0;
        if !(dt > 0.0) {
            return Err(Error::Numerical("snapshot times must increase".into()));
        }
        let (q0, q1) = (q(t0), q(t1));
        lhs += (a[m + 1] - a[m]) * 0.5 * (q0 + q1);
        rhs += 0.5 * dt * (b[m] * q0 + b[m + 1] * q1);
    }
    Ok((lhs - rhs).abs())
}

/// Hat function with peak at `center` and half-width `width`.
pub fn hat(center: f64, width: f64) -> impl Fn(f64) -> f64 {
    move |t| (1.0 - (t - center).abs() / width).max(0.0)
}

/// Largest weak-form defect over Legendre polynomials of degree `0..=k` in
/// space times `k + 1` hat functions on a uniform grid over the run.
///
/// `snaps` are time-ordered snapshots of one run, typically
/// [`Trajectory::snapshots`](crate::timestepper::Trajectory).
pub fn weak_residual(snaps: &[(f64, Field)], params: &ModelParams, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config("test basis size must be positive".into()));
    }
    if params.drift.is_some() {
        return Err(Error::Config("weak residual covers the drift-free equation only".into()));
    }
    if snaps.len() < 2 * k + 1 {
        return Err(Error::Numerical(format!(
            "weak residual with k = {k} needs at least {} snapshots, got {}",
            2 * k + 1,
            snaps.len()
        )));
    }
    let (t0, t1) = (snaps[0].0, snaps[snaps.len() - 1].0);
    let width = (t1 - t0) / k as f64;
    let mut worst: f64 = 0.0;
    for c in 0..=k {
        let q = hat(t0 + c as f64 * width, width);
        for j in 0..=k {
            worst = worst.max(weak_pairing(snaps, params, |x| legendre(j, x), &q)?);
        }
    }
    Ok(worst)
}
