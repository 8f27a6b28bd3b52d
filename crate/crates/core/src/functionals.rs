//! Scalar functionals of a field: mass, energies, entropies and the weighted
//! norms that appear in the a priori estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::weight;
use crate::model::{Field, ModelParams};
use crate::quad::{gl16_unit, integrate};

/// Values below this are raised to it before evaluating `G_0`.
pub const ENTROPY_FLOOR: f64 = 1e-14;

const GEPS_REL_TOL: f64 = 1e-12;

pub fn mass(field: &Field) -> f64 {
    field
        .values()
        .iter()
        .zip(field.grid().trapezoid_weights())
        .map(|(u, w)| u * w)
        .sum()
}

/// `1/2 int (1 - x^2 + delta) u_x^2`, one-sided differences on the faces
/// and the midpoint rule.
///
/// This is exactly the quadratic form whose gradient drives the discrete
/// operator, so it is the Lyapunov functional of the scheme.
pub fn energy(field: &Field, delta: f64) -> f64 {
    let g = field.grid();
    let h = g.h();
    let u = field.values();
    0.5 * h
        * g.faces()
            .iter()
            .enumerate()
            .map(|(f, &x)| {
                let d = (u[f + 1] - u[f]) / h;
                weight(x, delta) * d * d
            })
            .sum::<f64>()
}

/// Entropy density with `G''(z) = z^{-n}` and `G(A) = G'(A) = 0`.
///
/// For `n = 1` the anchored form `z ln(z/A) - (z - A)` is used, which keeps
/// `G >= 0`.
pub fn entropy_g0(z: f64, n: f64, anchor: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("G_0 needs z > 0, got {z}")));
    }
    let a = anchor;
    Ok(if n == 1.0 {
        z * (z / a).ln() - (z - a)
    } else if n == 2.0 {
        (a / z).ln() + z / a - 1.0
    } else {
        (z.powf(2.0 - n) - a.powf(2.0 - n)) / ((n - 1.0) * (n - 2.0)) - a.powf(1.0 - n) / (1.0 - n) * (z - a)
    })
}

/// `G_eps(z) = int_A^z int_A^v ds dv / (|s|^n + eps)`, evaluated as the
/// single integral `int_A^z (z - s) / (|s|^n + eps) ds`.
pub fn entropy_geps(z: f64, n: f64, eps: f64, anchor: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("G_eps needs eps > 0, got {eps}")));
    }
    if !z.is_finite() {
        return Err(Error::Domain(format!("G_eps needs finite z, got {z}")));
    }
    integrate(|s| (z - s) / (s.abs().powf(n) + eps), anchor, z, GEPS_REL_TOL, 0.0)
        .map_err(|e| Error::Numerical(format!("G_eps({z}; n={n}, eps={eps}, A={anchor}): {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntropyKind {
    G0,
    Geps,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyTotal {
    pub value: f64,
    /// Nodes raised to [`ENTROPY_FLOOR`] before evaluating `G_0`.
    pub floor_events: usize,
}

pub fn total_entropy(field: &Field, kind: EntropyKind, params: &ModelParams) -> Result<EntropyTotal> {
    let mut floor_events = 0;
    let mut pointwise = Vec::with_capacity(field.values().len());
    for &u in field.values() {
        let v = match kind {
            EntropyKind::G0 => {
                let z = if u < ENTROPY_FLOOR {
                    floor_events += 1;
                    ENTROPY_FLOOR
                } else {
                    u
                };
                entropy_g0(z, params.n, params.anchor)?
            }
            EntropyKind::Geps => entropy_geps(u, params.n, params.eps, params.anchor)?,
        };
        pointwise.push(v);
    }
    Ok(EntropyTotal { value: field.grid().quadrature(&pointwise)?, floor_events })
}

/// `max_i (1 - x_i^2)^{beta/2} |u_i - M/2|`.
pub fn weighted_sup_distance(field: &Field, beta: f64, total_mass: f64) -> f64 {
    let flat = 0.5 * total_mass;
    weighted_sup(field.grid().nodes(), field.values(), beta, |u| u - flat)
}

/// `max_i (1 - x_i^2)^{beta/2} |a_i - b_i|` for two fields on the same grid.
pub fn weighted_sup_difference(a: &Field, b: &Field, beta: f64) -> Result<f64> {
    if a.values().len() != b.values().len() {
        return Err(Error::LengthMismatch { expected: a.values().len(), got: b.values().len() });
    }
    let diff: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    Ok(weighted_sup(a.grid().nodes(), &diff, beta, |d| d))
}

fn weighted_sup(nodes: &[f64], u: &[f64], beta: f64, f: impl Fn(f64) -> f64) -> f64 {
    nodes
        .iter()
        .zip(u)
        .map(|(&x, &v)| weight(x, 0.0).max(0.0).powf(0.5 * beta) * f(v).abs())
        .fold(0.0, f64::max)
}

/// Right-hand side of the weighted sup estimate obtained from the energy by
/// Cauchy-Schwarz: `sqrt(C_0/2) max_x sqrt((1-x^2)^beta |ln((1+x)(1-x_0)/((1-x)(1+x_0)))|)`
/// with `C_0 = 2 E_0(u)` and `x_0` the first crossing of `u = M/2`.
///
/// Returns `None` when `u` never crosses its mean (flat field).
pub fn energy_sup_bound(field: &Field, beta: f64) -> Option<f64> {
    let flat = 0.5 * mass(field);
    let x = field.grid().nodes();
    let u = field.values();
    let mut x0 = None;
    for i in 0..u.len() - 1 {
        let (a, b) = (u[i] - flat, u[i + 1] - flat);
        if a == 0.0 {
            x0 = Some(x[i]);
            break;
        }
        if a * b < 0.0 {
            x0 = Some(x[i] + (x[i + 1] - x[i]) * a / (a - b));
            break;
        }
    }
    let x0 = x0?;
    let c0 = 2.0 * energy(field, 0.0);
    let best = x
        .iter()
        .map(|&xi| {
            let w = weight(xi, 0.0);
            if w <= 0.0 {
                return 0.0;
            }
            let ratio = ((1.0 + xi) * (1.0 - x0)) / ((1.0 - xi) * (1.0 + x0));
            (w.powf(beta) * ratio.ln().abs()).sqrt()
        })
        .fold(0.0, f64::max);
    Some((0.5 * c0).sqrt() * best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedNorms {
    /// `int (1 - x^2)^mu u^2`.
    pub l2_mu: f64,
    /// `int (1 - x^2)^gamma u_x^2`.
    pub grad_gamma: f64,
    /// `mu < 0` and `u(+-1) != 0`: the weight is singular on a nonzero value.
    pub endpoint_singular: bool,
}

pub fn weighted_norms(field: &Field, mu: f64, gamma: f64) -> Result<WeightedNorms> {
    if !(mu > -1.0) {
        return Err(Error::Domain(format!("weight exponent mu must exceed -1, got {mu}")));
    }
    let g = field.grid();
    let u = field.values();
    let x = g.nodes();
    let h = g.h();
    let l2_mu = if mu >= 0.0 {
        let vals: Vec<f64> = x.iter().zip(u).map(|(&x, &u)| weight(x, 0.0).max(0.0).powf(mu) * u * u).collect();
        g.quadrature(&vals)?
    } else {
        singular_weight_l2(x, u, mu)
    };
    let grad_gamma = h * g
        .faces()
        .iter()
        .enumerate()
        .map(|(f, &xf)| {
            let d = (u[f + 1] - u[f]) / h;
            weight(xf, 0.0).powf(gamma) * d * d
        })
        .sum::<f64>();
    let endpoint_singular = mu < 0.0 && (u[0] != 0.0 || u[u.len() - 1] != 0.0);
    Ok(WeightedNorms { l2_mu, grad_gamma, endpoint_singular })
}

/// Product integration of `(1-x^2)^mu u^2` for `-1 < mu < 0` with `u`
/// linear per cell; the endpoint singularity is removed by the substitution
/// `s = (1 -+ x)^{1+mu}` on each half of the domain.
fn singular_weight_l2(x: &[f64], u: &[f64], mu: f64) -> f64 {
    let (t, w) = gl16_unit();
    let p = 1.0 / (1.0 + mu);
    let mut total = 0.0;
    for i in 0..x.len() - 1 {
        let (xa, xb) = (x[i], x[i + 1]);
        let interp = |xv: f64| {
            let lam = (xv - xa) / (xb - xa);
            let v = u[i] + lam * (u[i + 1] - u[i]);
            v * v
        };
        let mid = 0.5 * (xa + xb);
        let cell = if mid >= 0.0 {
            // (1 - x)^mu dx = -p ds with s = (1 - x)^{1/p}
            let (sa, sb) = ((1.0 - xb).powf(1.0 + mu), (1.0 - xa).powf(1.0 + mu));
            (0..16)
                .map(|k| {
                    let s = sa + t[k] * (sb - sa);
                    let xv = 1.0 - s.powf(p);
                    w[k] * (1.0 + xv).powf(mu) * interp(xv)
                })
                .sum::<f64>()
                * (sb - sa)
                * p
        } else {
            let (sa, sb) = ((1.0 + xa).powf(1.0 + mu), (1.0 + xb).powf(1.0 + mu));
            (0..16)
                .map(|k| {
                    let s = sa + t[k] * (sb - sa);
                    let xv = s.powf(p) - 1.0;
                    w[k] * (1.0 - xv).powf(mu) * interp(xv)
                })
                .sum::<f64>()
                * (sb - sa)
                * p
        };
        total += cell;
    }
    total
}

/// Discrete Hölder constant in `x`:
/// `max_{i != j} (1 - x_i^2)^{beta/2} |u_i - u_j| / |x_i - x_j|^{alpha/2}`.
pub fn holder_seminorm_x(field: &Field, beta: f64, alpha: f64) -> f64 {
    let x = field.grid().nodes();
    let u = field.values();
    let mut best = 0.0f64;
    for i in 0..x.len() {
        let wi = weight(x[i], 0.0).max(0.0).powf(0.5 * beta);
        if wi == 0.0 {
            continue;
        }
        for j in 0..x.len() {
            if i == j {
                continue;
            }
            let v = wi * (u[i] - u[j]).abs() / (x[i] - x[j]).abs().powf(0.5 * alpha);
            best = best.max(v);
        }
    }
    best
}

/// Weight exponents used for the diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub beta: f64,
    pub mu: f64,
    pub gamma: f64,
    pub alpha: f64,
}

impl Exponents {
    /// `beta = min(1, 2/n)`, `mu = beta/2`, `gamma = 1/2`, `alpha = beta/2`.
    pub fn for_n(n: f64) -> Self {
        let beta = (2.0 / n).min(1.0);
        Self { beta, mu: 0.5 * beta, gamma: 0.5, alpha: 0.5 * beta }
    }

    pub fn validate(&self, n: f64) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.beta > 0.0 && self.beta <= 2.0 / n) {
            return bad(format!("beta = {} outside (0, 2/n]", self.beta));
        }
        if !(self.mu > -1.0 && self.mu <= self.beta) {
            return bad(format!("mu = {} outside (-1, beta]", self.mu));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma = {} outside (0, 1)", self.gamma));
        }
        if !(self.alpha > 0.0 && self.alpha < self.beta) {
            return bad(format!("alpha = {} outside (0, beta)", self.alpha));
        }
        Ok(())
    }
}

/// One row of diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagRecord {
    pub t: f64,
    pub mass: f64,
    pub energy_delta: f64,
    pub energy_0: f64,
    pub entropy_g0: f64,
    pub entropy_geps: f64,
    pub min_u: f64,
    pub diss_energy: f64,
    pub diss_entropy: f64,
    pub wsup_beta: f64,
    pub wl2_mu: f64,
    pub wgrad_gamma: f64,
}

impl DiagRecord {
    pub const CSV_HEADER: [&'static str; 12] = [
        "t",
        "mass",
        "energy_delta",
        "energy_0",
        "entropy_G0",
        "entropy_Geps",
        "min_u",
        "diss_energy",
        "diss_entropy",
        "wsup_beta",
        "wl2_mu",
        "wgrad_gamma",
    ];

    pub fn as_row(&self) -> [f64; 12] {
        [
            self.t,
            self.mass,
            self.energy_delta,
            self.energy_0,
            self.entropy_g0,
            self.entropy_geps,
            self.min_u,
            self.diss_energy,
            self.diss_entropy,
            self.wsup_beta,
            self.wl2_mu,
            self.wgrad_gamma,
        ]
    }

    pub fn from_row(row: &[f64]) -> Result<Self> {
        if row.len() != 12 {
            return Err(Error::LengthMismatch { expected: 12, got: row.len() });
        }
        Ok(Self {
            t: row[0],
            mass: row[1],
            energy_delta: row[2],
            energy_0: row[3],
            entropy_g0: row[4],
            entropy_geps: row[5],
            min_u: row[6],
            diss_energy: row[7],
            diss_entropy: row[8],
            wsup_beta: row[9],
            wl2_mu: row[10],
            wgrad_gamma: row[11],
        })
    }
}

/// Evaluate every functional of `field`. `G_eps` falls back to `G_0` when
/// `eps = 0`.
pub fn diagnose(
    field: &Field,
    params: &ModelParams,
    exps: &Exponents,
    t: f64,
    diss_energy: f64,
    diss_entropy: f64,
) -> Result<(DiagRecord, usize)> {
    let m = mass(field);
    let g0 = total_entropy(field, EntropyKind::G0, params)?;
    let geps = if params.eps > 0.0 {
        total_entropy(field, EntropyKind::Geps, params)?.value
    } else {
        g0.value
    };
    let norms = weighted_norms(field, exps.mu, exps.gamma)?;
    Ok((
        DiagRecord {
            t,
            mass: m,
            energy_delta: energy(field, params.delta),
            energy_0: energy(field, 0.0),
            entropy_g0: g0.value,
            entropy_geps: geps,
            min_u: field.min(),
            diss_energy,
            diss_entropy,
            wsup_beta: weighted_sup_distance(field, exps.beta, m),
            wl2_mu: norms.l2_mu,
            wgrad_gamma: norms.grad_gamma,
        },
        g0.floor_events,
    ))
}
