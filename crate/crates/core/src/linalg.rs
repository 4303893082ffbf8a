// SPDX-License-Identifier: MIT OR Apache-2.0

//! Least-squares helpers: an SVD-backed minimum-norm solver for the paired
//! spline design, and an incrementally extended orthonormal basis used to
//! score candidate knots during selection.

use nalgebra::{DMatrix, DVector};

/// Relative rank cut-off applied to singular values.
pub const RANK_TOL: f64 = 1e-10;

/// Minimum-norm least-squares solver for one design and many responses.
pub struct MinNormSolver {
    /// Pseudo-inverse, `cols x rows`.
    pinv: DMatrix<f64>,
    design: DMatrix<f64>,
    rank: usize,
}

impl MinNormSolver {
    pub fn new(design: DMatrix<f64>) -> Self {
        let max_col_norm = design
            .column_iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
        let tol = RANK_TOL * max_col_norm.max(f64::MIN_POSITIVE);
        let svd = design.clone().svd(true, true);
        let u = svd.u.as_ref().expect("u requested");
        let v_t = svd.v_t.as_ref().expect("v_t requested");
        let k = svd.singular_values.len();
        let mut scaled_ut = u.transpose();
        let mut rank = 0;
        for i in 0..k {
            let s = svd.singular_values[i];
            let inv = if s > tol {
                rank += 1;
                1.0 / s
            } else {
                0.0
            };
            scaled_ut.row_mut(i).scale_mut(inv);
        }
        let pinv = v_t.transpose() * scaled_ut;
        Self { pinv, design, rank }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn columns(&self) -> usize {
        self.design.ncols()
    }

    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let y = DVector::from_column_slice(y);
        (&self.pinv * y).iter().copied().collect()
    }

    pub fn fitted(&self, beta: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(beta);
        (&self.design * b).iter().copied().collect()
    }

    /// Row `i` of the pseudo-inverse: the linear functional mapping a response
    /// to coefficient `i`.
    pub fn coefficient_functional(&self, i: usize) -> Vec<f64> {
        self.pinv.row(i).iter().copied().collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Orthonormal basis built by classical Gram-Schmidt with one
/// re-orthogonalisation pass.
#[derive(Debug, Clone, Default)]
pub struct OrthoBasis {
    vectors: Vec<Vec<f64>>,
}

impl OrthoBasis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.vectors.last().map(Vec::as_slice)
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Component of `v` orthogonal to the basis, normalised; `None` when `v`
    /// lies numerically inside the span.
    pub fn orthogonalise(&self, v: &[f64]) -> Option<Vec<f64>> {
        let norm0 = dot(v, v).sqrt();
        if norm0 == 0.0 {
            return None;
        }
        let mut r = v.to_vec();
        for _ in 0..2 {
            for q in &self.vectors {
                let p = dot(q, &r);
                axpy(-p, q, &mut r);
            }
        }
        let norm = dot(&r, &r).sqrt();
        if norm <= 1e-12 * norm0 {
            return None;
        }
        r.iter_mut().for_each(|x| *x /= norm);
        Some(r)
    }

    pub fn push(&mut self, v: &[f64]) -> bool {
        match self.orthogonalise(v) {
            Some(q) => {
                self.vectors.push(q);
                true
            }
            None => false,
        }
    }

    /// Residual of `y` after projecting onto the basis.
    pub fn residual(&self, y: &[f64]) -> Vec<f64> {
        let mut r = y.to_vec();
        for _ in 0..2 {
            for q in &self.vectors {
                let p = dot(q, &r);
                axpy(-p, q, &mut r);
            }
        }
        r
    }
}

/// Residual of `r` after removing its components along orthonormal `dirs`.
pub fn deflate(r: &[f64], dirs: &[Vec<f64>]) -> Vec<f64> {
    let mut out = r.to_vec();
    for q in dirs {
        let p = dot(q, &out);
        axpy(-p, q, &mut out);
    }
    out
}
