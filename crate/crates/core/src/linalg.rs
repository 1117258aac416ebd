//! Dense sensing matrix and the two matrix-vector kernels the solvers need.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Dense `m x n` real matrix with unit-norm columns, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    data: Vec<f64>,
    m: usize,
    n: usize,
}

impl SensingMatrix {
    /// Draws i.i.d. standard normal entries and rescales every column to unit
    /// l2 norm.
    pub fn gaussian(m: usize, n: usize, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid(format!(
                "sensing matrix dimensions must be positive, got {m}x{n}"
            )));
        }
        let mut rng = rng_from_seed(seed);
        let data: Vec<f64> = (0..m * n).map(|_| rng.sample(StandardNormal)).collect();
        Self::from_row_major(m, n, data)
    }

    /// Builds a matrix from row-major entries, normalizing each column.
    ///
    /// Fails on non-finite entries or an all-zero column.
    pub fn from_row_major(m: usize, n: usize, mut data: Vec<f64>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid(format!(
                "sensing matrix dimensions must be positive, got {m}x{n}"
            )));
        }
        if data.len() != m * n {
            return Err(Error::invalid(format!(
                "expected {} entries for a {m}x{n} matrix, got {}",
                m * n,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sensing matrix entries must be finite"));
        }
        let mut norms = vec![0.0; n];
        for row in data.chunks_exact(n) {
            for (acc, &v) in norms.iter_mut().zip(row) {
                *acc += v * v;
            }
        }
        for (j, s) in norms.iter_mut().enumerate() {
            if *s == 0.0 {
                return Err(Error::invalid(format!("column {j} is identically zero")));
            }
            *s = s.sqrt();
        }
        for row in data.chunks_exact_mut(n) {
            for (v, &s) in row.iter_mut().zip(&norms) {
                *v /= s;
            }
        }
        Ok(SensingMatrix { data, m, n })
    }

    /// The `n x n` identity (unit columns by construction).
    pub fn identity(n: usize) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::from_row_major(n, n, data)
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn column_norm(&self, j: usize) -> f64 {
        (0..self.m).map(|i| self.get(i, j).powi(2)).sum::<f64>().sqrt()
    }

    /// `out = A x`
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.m);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.n)) {
            *o = dot(row, x);
        }
    }

    /// `out = A^T r`
    pub fn apply_transpose(&self, r: &[f64], out: &mut [f64]) {
        debug_assert_eq!(r.len(), self.m);
        debug_assert_eq!(out.len(), self.n);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (&ri, row) in r.iter().zip(self.data.chunks_exact(self.n)) {
            if ri != 0.0 {
                axpy(ri, row, out);
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        self.apply(x, &mut out);
        out
    }
}

/// Dot product with four independent accumulators (fixed summation order).
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm_sq(v: &[f64]) -> f64 {
    dot(v, v)
}

pub fn norm(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
