//! Square band matrices with an LU factorization using partial pivoting.

use crate::error::{Error, Result};

/// Square matrix with `lower` sub-diagonals and `upper` super-diagonals.
///
/// Storage keeps `lower` extra super-diagonals so that row interchanges
/// during factorization have room for fill-in.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        let width = 2 * lower + upper + 1;
        Self { n, lower, upper, width, data: vec![0.0; n * width] }
    }

    pub fn identity(n: usize, lower: usize, upper: usize) -> Self {
        let mut m = Self::zeros(n, lower, upper);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.lower
    }

    pub fn upper(&self) -> usize {
        self.upper
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.lower < i || j > i + self.upper + self.lower || j >= self.n || i >= self.n {
            return None;
        }
        Some(i * self.width + (j + self.lower - i))
    }

    /// Entry `(i, j)`; zero outside the stored band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.data[k])
    }

    /// # Panics
    /// If `(i, j)` lies outside the declared band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.lower >= i && j <= i + self.upper && j < self.n,
            "entry ({i}, {j}) outside band"
        );
        let k = self.slot(i, j).expect("checked above");
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.lower);
                let hi = (i + self.upper).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// Factorize in place as `P A = L U`.
    pub fn factorize(mut self) -> Result<BandLu> {
        let n = self.n;
        let kl = self.lower;
        let ku_fill = self.upper + self.lower;
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular { column: k });
            }
            pivots[k] = p;
            let jmax = (k + ku_fill).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.get(k, j);
                    let b = self.get(p, j);
                    self.put(k, j, b);
                    self.put(p, j, a);
                }
            }
            let pivot = self.get(k, k);
            for i in k + 1..=last {
                let l = self.get(i, k) / pivot;
                if l == 0.0 {
                    self.put(i, k, 0.0);
                    continue;
                }
                self.put(i, k, l);
                for j in k + 1..=jmax {
                    let ukj = self.get(k, j);
                    if ukj != 0.0 {
                        let v = self.get(i, j) - l * ukj;
                        self.put(i, j, v);
                    }
                }
            }
        }
        Ok(BandLu { lu: self, pivots })
    }

    #[inline]
    fn put(&mut self, i: usize, j: usize, v: f64) {
        let k = self.slot(i, j).expect("fill-in stays within storage");
        self.data[k] = v;
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    lu: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.lu.n;
        let kl = self.lu.lower;
        let ku_fill = self.lu.upper + kl;
        let mut x = rhs.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                x[i] -= self.lu.get(i, k) * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + ku_fill).min(n - 1) {
                s -= self.lu.get(k, j) * x[j];
            }
            x[k] = s / self.lu.get(k, k);
        }
        x
    }
}
