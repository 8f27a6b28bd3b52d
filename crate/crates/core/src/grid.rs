//! Uniform node-centred grid on `(-1, 1)` and the spherical weight.

use crate::error::{Error, Result};

/// Uniform grid with `cells` cells, nodes at both endpoints.
///
/// Coordinates are computed as `(2i - N) / N` so that the grid is exactly
/// symmetric under `x -> -x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    cells: usize,
    h: f64,
    nodes: Vec<f64>,
    faces: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn new(cells: usize) -> Result<Self> {
        if cells < 8 {
            return Err(Error::Config(format!("grid needs at least 8 cells, got {cells}")));
        }
        if !cells.is_multiple_of(2) {
            return Err(Error::Config(format!("grid cell count must be even, got {cells}")));
        }
        let nf = cells as f64;
        let nodes: Vec<f64> =
            (0..=cells).map(|i| (2.0 * i as f64 - nf) / nf).collect();
        let faces: Vec<f64> =
            (0..cells).map(|i| (2.0 * i as f64 + 1.0 - nf) / nf).collect();
        let h = 2.0 / nf;
        let mut weights = vec![h; cells + 1];
        weights[0] = 0.5 * h;
        weights[cells] = 0.5 * h;
        Ok(Self { cells, h, nodes, faces, weights })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn len(&self) -> usize {
        self.cells + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    /// Trapezoid weights: `h/2` at the endpoints, `h` elsewhere.
    pub fn trapezoid_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the node mirrored through `x = 0`.
    pub fn mirror(&self, i: usize) -> usize {
        self.cells - i
    }

    /// Composite trapezoid rule over the nodes.
    pub fn quadrature(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: values.len() });
        }
        Ok(values.iter().zip(&self.weights).map(|(v, w)| v * w).sum())
    }

    /// Midpoint rule over the faces.
    pub fn face_quadrature(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.cells {
            return Err(Error::LengthMismatch { expected: self.cells, got: values.len() });
        }
        Ok(self.h * values.iter().sum::<f64>())
    }
}

/// `1 - x^2 + delta`.
#[inline]
pub fn weight(x: f64, delta: f64) -> f64 {
    1.0 - x * x + delta
}
