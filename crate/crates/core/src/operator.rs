//! Conservative discretization of the regularized fourth-order flux.
//!
//! With `w = 1 - x^2 + delta` and the pressure `p = -(w u_x)_x` (the
//! variational derivative of the energy `1/2 int w u_x^2`), the equation reads
//! `u_t = (w m(u) p_x)_x`. On the grid:
//!
//! ```text
//! s_f = w_f (u_{f+1} - u_f) / h                 weighted slope, faces
//! p_i = (s_{i-1} - s_i) / omega_i               pressure, nodes (s_{-1} = s_N = 0)
//! g_f = (p_{f+1} - p_f) / h                     pressure gradient, faces
//! q_f = w_f m_f [ (a - b x_f) + c (2 u_x - g_f) ]
//! du_i/dt = -(q_i - q_{i-1}) / omega_i          q_{-1} = q_N = 0
//! ```
//!
//! `omega` are the trapezoid weights, so the boundary nodes own half cells and
//! both no-flux conditions enter as exactly zero boundary fluxes. With this
//! layout the discrete mass, energy and entropy balances hold exactly:
//! `sum omega du/dt = 0`, `dE/dt = -h sum w m g^2` and, with the entropy mean
//! for `m`, `d/dt sum omega G(u) = -sum omega p^2`.

use std::sync::Arc;

use crate::band::BandMatrix;
use crate::error::{Error, Result};
use crate::grid::{weight, Grid};
use crate::model::{Field, MobilityMode, ModelParams};
use crate::quad::gl16_unit;

/// Face mobility between two nodal values.
pub fn mobility_face(u_left: f64, u_right: f64, n: f64, eps: f64, mode: MobilityMode) -> f64 {
    let p = ModelParams { n, eps, ..ModelParams::new(n, eps, 0.0) };
    mobility_face_grad(u_left, u_right, &p, mode).0
}

/// Face mobility and its partial derivatives in `(u_left, u_right)`.
///
/// The entropy mean equals the harmonic average of `|s|^n + eps` over the
/// segment `[u_left, u_right]`, which is what `(b - a) / (G'(b) - G'(a))`
/// reduces to; it is evaluated with a 16-point Gauss rule.
pub fn mobility_face_grad(ul: f64, ur: f64, params: &ModelParams, mode: MobilityMode) -> (f64, f64, f64) {
    match mode {
        MobilityMode::Arithmetic => (
            0.5 * (params.mobility(ul) + params.mobility(ur)),
            0.5 * params.mobility_derivative(ul),
            0.5 * params.mobility_derivative(ur),
        ),
        MobilityMode::Entropy => {
            let (t, wts) = gl16_unit();
            let du = ur - ul;
            let mut harm = 0.0;
            let mut dl = 0.0;
            let mut dr = 0.0;
            for k in 0..16 {
                let s = ul + t[k] * du;
                let mu = params.mobility(s);
                let r = wts[k] / mu;
                harm += r;
                let d = -r * params.mobility_derivative(s) / mu;
                dl += (1.0 - t[k]) * d;
                dr += t[k] * d;
            }
            let m = if ul == ur { params.mobility(ul) } else { 1.0 / harm };
            (m, -m * m * dl, -m * m * dr)
        }
    }
}

/// Intermediate quantities of one flux evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxAssembly {
    /// `w_delta u_x` at the faces.
    pub slope: Vec<f64>,
    /// `-(w_delta u_x)_x` at the nodes.
    pub pressure: Vec<f64>,
    /// `((w_delta u_x)_xx)` at the faces, i.e. `-p_x`.
    pub slope_xx: Vec<f64>,
    /// Face mobilities.
    pub mobility: Vec<f64>,
    /// Fluxes `q` with the two boundary fluxes prepended/appended (length `N + 2`).
    pub flux: Vec<f64>,
    /// `du/dt` at the nodes.
    pub rhs: Vec<f64>,
}

/// Discrete spatial operator for fixed grid and parameters.
#[derive(Debug, Clone)]
pub struct Operator {
    grid: Arc<Grid>,
    params: ModelParams,
    face_weight: Vec<f64>,
    // tridiagonal pressure matrix p = P u
    p_lower: Vec<f64>,
    p_diag: Vec<f64>,
    p_upper: Vec<f64>,
}

impl Operator {
    pub fn new(grid: Arc<Grid>, params: ModelParams) -> Self {
        let h = grid.h();
        let face_weight: Vec<f64> = grid.faces().iter().map(|&x| weight(x, params.delta)).collect();
        let omega = grid.trapezoid_weights();
        let n = grid.len();
        let mut p_lower = vec![0.0; n];
        let mut p_diag = vec![0.0; n];
        let mut p_upper = vec![0.0; n];
        for i in 0..n {
            if i >= 1 {
                p_lower[i] = -face_weight[i - 1] / (h * omega[i]);
                p_diag[i] += face_weight[i - 1] / (h * omega[i]);
            }
            if i + 1 < n {
                p_upper[i] = -face_weight[i] / (h * omega[i]);
                p_diag[i] += face_weight[i] / (h * omega[i]);
            }
        }
        Self { grid, params, face_weight, p_lower, p_diag, p_upper }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn face_weights(&self) -> &[f64] {
        &self.face_weight
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.grid.len() {
            return Err(Error::LengthMismatch { expected: self.grid.len(), got: u.len() });
        }
        Ok(())
    }

    /// `w_delta u_x` at faces.
    pub fn slope(&self, u: &[f64]) -> Vec<f64> {
        let h = self.grid.h();
        self.face_weight
            .iter()
            .enumerate()
            .map(|(f, w)| w * (u[f + 1] - u[f]) / h)
            .collect()
    }

    /// `p = -(w_delta u_x)_x` at nodes.
    pub fn pressure(&self, u: &[f64]) -> Vec<f64> {
        let s = self.slope(u);
        let omega = self.grid.trapezoid_weights();
        let n = u.len();
        (0..n)
            .map(|i| {
                let left = if i >= 1 { s[i - 1] } else { 0.0 };
                let right = if i + 1 < n { s[i] } else { 0.0 };
                (left - right) / omega[i]
            })
            .collect()
    }

    /// `p_x` at faces.
    pub fn pressure_gradient(&self, u: &[f64]) -> Vec<f64> {
        let h = self.grid.h();
        let p = self.pressure(u);
        p.windows(2).map(|w| (w[1] - w[0]) / h).collect()
    }

    pub fn face_mobilities(&self, u: &[f64]) -> Vec<f64> {
        u.windows(2)
            .map(|w| mobility_face_grad(w[0], w[1], &self.params, self.params.mobility).0)
            .collect()
    }

    pub fn assemble(&self, u: &[f64]) -> Result<FluxAssembly> {
        self.check_len(u)?;
        let h = self.grid.h();
        let omega = self.grid.trapezoid_weights();
        let drift = self.params.drift_or_default();
        let curv = if drift.full_curvature { 2.0 } else { 0.0 };
        let slope = self.slope(u);
        let pressure = self.pressure(u);
        let nf = self.face_weight.len();
        let mut slope_xx = Vec::with_capacity(nf);
        let mut mobility = Vec::with_capacity(nf);
        let mut flux = Vec::with_capacity(nf + 2);
        flux.push(0.0);
        for f in 0..nf {
            let g = (pressure[f + 1] - pressure[f]) / h;
            let m = mobility_face_grad(u[f], u[f + 1], &self.params, self.params.mobility).0;
            let x = self.grid.faces()[f];
            let ux = (u[f + 1] - u[f]) / h;
            let bracket = (drift.a - drift.b * x) + drift.c * (curv * ux - g);
            slope_xx.push(-g);
            mobility.push(m);
            flux.push((self.face_weight[f] * m) * bracket);
        }
        flux.push(0.0);
        let rhs: Vec<f64> = (0..u.len()).map(|i| -(flux[i + 1] - flux[i]) / omega[i]).collect();
        if let Some(i) = rhs.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite operator value at node {i}")));
        }
        Ok(FluxAssembly { slope, pressure, slope_xx, mobility, flux, rhs })
    }

    /// `du/dt` at nodes.
    pub fn rhs(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.assemble(u)?.rhs)
    }

    /// `d(rhs)/du` as a pentadiagonal band matrix.
    pub fn rhs_jacobian(&self, u: &[f64]) -> Result<BandMatrix> {
        self.check_len(u)?;
        let n = u.len();
        let h = self.grid.h();
        let omega = self.grid.trapezoid_weights();
        let drift = self.params.drift_or_default();
        let curv = if drift.full_curvature { 2.0 } else { 0.0 };
        let p = self.pressure(u);
        let p_entry = |i: usize, j: usize| -> f64 {
            if j + 1 == i {
                self.p_lower[i]
            } else if j == i {
                self.p_diag[i]
            } else if j == i + 1 {
                self.p_upper[i]
            } else {
                0.0
            }
        };
        // dq_f/du_j for j in f-1..=f+2, stored at offset j - f + 1
        let nf = n - 1;
        let mut dq = vec![[0.0f64; 4]; nf];
        for f in 0..nf {
            let g = (p[f + 1] - p[f]) / h;
            let (m, dml, dmr) = mobility_face_grad(u[f], u[f + 1], &self.params, self.params.mobility);
            let x = self.grid.faces()[f];
            let ux = (u[f + 1] - u[f]) / h;
            let bracket = (drift.a - drift.b * x) + drift.c * (curv * ux - g);
            let w = self.face_weight[f];
            for (k, slot) in dq[f].iter_mut().enumerate() {
                let j = f as i64 + k as i64 - 1;
                if j < 0 || j as usize >= n {
                    continue;
                }
                let j = j as usize;
                let dg = (p_entry(f + 1, j) - p_entry(f, j)) / h;
                let mut dux = 0.0;
                if j == f + 1 {
                    dux = 1.0 / h;
                } else if j == f {
                    dux = -1.0 / h;
                }
                let dbracket = drift.c * (curv * dux - dg);
                let mut dm = 0.0;
                if j == f {
                    dm = dml;
                } else if j == f + 1 {
                    dm = dmr;
                }
                *slot = w * (dm * bracket + m * dbracket);
            }
        }
        let mut jac = BandMatrix::zeros(n, 2, 2);
        for i in 0..n {
            let lo = i.saturating_sub(2);
            let hi = (i + 2).min(n - 1);
            for j in lo..=hi {
                let right = if i < nf { face_entry(&dq[i], i, j) } else { 0.0 };
                let left = if i >= 1 { face_entry(&dq[i - 1], i - 1, j) } else { 0.0 };
                let v = -(right - left) / omega[i];
                if !v.is_finite() {
                    return Err(Error::Numerical(format!("non-finite Jacobian entry ({i}, {j})")));
                }
                jac.set(i, j, v);
            }
        }
        Ok(jac)
    }

    /// `I - dt * d(rhs)/du`, the Newton matrix of backward Euler.
    pub fn jacobian(&self, u: &[f64], dt: f64) -> Result<BandMatrix> {
        let mut jac = self.rhs_jacobian(u)?;
        let n = u.len();
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                let v = -dt * jac.get(i, j) + if i == j { 1.0 } else { 0.0 };
                jac.set(i, j, v);
            }
        }
        Ok(jac)
    }

    /// Energy dissipation rate `int w m [(w u_x)_xx]^2`, discretized as
    /// `h sum_f w_f m_f g_f^2`.
    pub fn energy_dissipation(&self, u: &[f64]) -> f64 {
        let h = self.grid.h();
        let g = self.pressure_gradient(u);
        let m = self.face_mobilities(u);
        h * g.iter().zip(&m).zip(&self.face_weight).map(|((g, m), w)| w * m * g * g).sum::<f64>()
    }

    /// Entropy dissipation rate `int [(w u_x)_x]^2 = int p^2` (trapezoid).
    pub fn entropy_dissipation(&self, u: &[f64]) -> f64 {
        let p = self.pressure(u);
        p.iter().zip(self.grid.trapezoid_weights()).map(|(p, w)| w * p * p).sum()
    }
}

fn face_entry(row: &[f64; 4], f: usize, j: usize) -> f64 {
    let k = j as i64 - f as i64 + 1;
    if (0..4).contains(&k) { row[k as usize] } else { 0.0 }
}

/// `du/dt` of the regularized equation.
pub fn apply_operator(field: &Field, params: &ModelParams) -> Result<Vec<f64>> {
    let mut plain = params.clone();
    plain.drift = None;
    Operator::new(field.grid().clone(), plain).rhs(field.values())
}

/// Flux assembly including the gravity/rotation/full-curvature terms.
pub fn extended_flux(field: &Field, params: &ModelParams) -> Result<FluxAssembly> {
    Operator::new(field.grid().clone(), params.clone()).assemble(field.values())
}

/// `I - dt * d(rhs)/du`.
pub fn jacobian(field: &Field, params: &ModelParams, dt: f64) -> Result<BandMatrix> {
    Operator::new(field.grid().clone(), params.clone()).jacobian(field.values(), dt)
}
