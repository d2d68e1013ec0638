//! Dense Cholesky on packed lower-triangular storage (row `i` starts at
//! `i (i + 1) / 2`), so forward substitution walks memory contiguously.

use std::ops::Range;

#[derive(Debug, Clone)]
pub(crate) struct PackedCholesky {
    n: usize,
    l: Vec<f64>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl PackedCholesky {
    pub fn packed_zeros(n: usize) -> Vec<f64> {
        vec![0.0; n * (n + 1) / 2]
    }

    pub fn row_range(i: usize) -> Range<usize> {
        let s = i * (i + 1) / 2;
        s..s + i + 1
    }

    /// Factors a packed symmetric matrix in place; `None` if a pivot is not
    /// strictly positive.
    pub fn factor(mut a: Vec<f64>, n: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), n * (n + 1) / 2);
        for i in 0..n {
            let ri = i * (i + 1) / 2;
            for j in 0..=i {
                let rj = j * (j + 1) / 2;
                let s = a[ri + j] - dot(&a[ri..ri + j], &a[rj..rj + j]);
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    a[ri + i] = s.sqrt();
                } else {
                    a[ri + j] = s / a[rj + j];
                }
            }
        }
        Some(Self { n, l: a })
    }

    /// Solves `L w = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let ri = i * (i + 1) / 2;
            let s = b[i] - dot(&self.l[ri..ri + i], &w);
            w.push(s / self.l[ri + i]);
        }
        w
    }

    /// Solves `L^T x = w`.
    pub fn backward(&self, w: &[f64]) -> Vec<f64> {
        let mut x = w.to_vec();
        for i in (0..self.n).rev() {
            let ri = i * (i + 1) / 2;
            x[i] /= self.l[ri + i];
            let xi = x[i];
            for (k, lk) in self.l[ri..ri + i].iter().enumerate() {
                x[k] -= lk * xi;
            }
        }
        x
    }

    /// Solves `L L^T x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }

    /// `1/2 ln det(L L^T)`.
    pub fn half_ln_det(&self) -> f64 {
        (0..self.n).map(|i| self.l[i * (i + 1) / 2 + i].ln()).sum()
    }
}
