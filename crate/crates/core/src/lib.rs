//! Regularized thin-film flow on the outer surface of a sphere.
//!
//! The film thickness `u(x, t)` on `x = -cos(theta) in (-1, 1)` evolves by
//!
//! ```text
//! u_t + [ (1 - x^2 + delta) (|u|^n + eps) ((1 - x^2 + delta) u_x)_xx ]_x = 0
//! ```
//!
//! with no-flux conditions at `x = +-1`. The crate provides a conservative
//! finite-difference discretization whose discrete energy and entropy
//! identities hold exactly, an implicit time integrator, the diagnostics of the
//! a priori estimate chain, regularization-removal sweeps and the asymptotic
//! analysis (Hardy quotients, decay fits, steady states, weak-form residuals).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod band;
pub mod continuation;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod model;
pub mod operator;
pub mod quad;
pub mod timestepper;

pub use error::{Error, Result};
pub use grid::Grid;
pub use model::{Drift, Field, MobilityMode, ModelParams};
