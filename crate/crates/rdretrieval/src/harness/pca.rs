//! Deterministic principal-component projection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{RdError, Result};

/// Eigenvalues below this fraction of the largest (or of 1.0 for all-zero
/// data) count as zero-variance components.
const ZERO_VAR_REL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// d x k, one principal direction per column, descending eigenvalue.
    pub components: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// Retained components with (numerically) zero variance; nonzero on
    /// rank-deficient data and worth a warning upstream.
    pub zero_variance: usize,
}

/// Fit a k-component PCA on row samples. Signs are fixed so the largest-
/// magnitude coordinate of each component is positive, making the model a
/// pure function of the data.
pub fn fit_pca(samples: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let n = samples.len();
    let d = samples.first().map(Vec::len).unwrap_or(0);
    if n < 2 || d == 0 || samples.iter().any(|s| s.len() != d) {
        return Err(RdError::Data("PCA needs >= 2 equal-length samples".into()));
    }
    if k == 0 || k > d {
        return Err(RdError::InvalidInput(format!("PCA components must be in 1..={d}, got {k}")));
    }
    let mut mean = DVector::zeros(d);
    for s in samples {
        mean += DVector::from_row_slice(s);
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for s in samples {
        let x = DVector::from_row_slice(s) - &mean;
        cov.ger(1.0 / (n - 1) as f64, &x, &x, 1.0);
    }

    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap().then(a.cmp(&b)));

    let mut components = DMatrix::zeros(d, k);
    let mut eigenvalues = Vec::with_capacity(k);
    for (j, &src) in order.iter().take(k).enumerate() {
        let col = eig.eigenvectors.column(src);
        let pivot = (0..d)
            .max_by(|&a, &b| col[a].abs().partial_cmp(&col[b].abs()).unwrap().then(b.cmp(&a)))
            .unwrap();
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            components[(i, j)] = sign * col[i];
        }
        eigenvalues.push(eig.eigenvalues[src].max(0.0));
    }
    let scale = eigenvalues.first().copied().unwrap_or(0.0).max(1.0);
    let zero_variance = eigenvalues.iter().filter(|&&v| v < ZERO_VAR_REL * scale).count();
    Ok(PcaModel { mean, components, eigenvalues, zero_variance })
}

impl PcaModel {
    pub fn project(&self, x: &[f64], k: usize) -> Vec<f64> {
        let k = k.min(self.components.ncols());
        let centered = DVector::from_row_slice(x) - &self.mean;
        (0..k).map(|j| self.components.column(j).dot(&centered)).collect()
    }

    pub fn project_all(&self, xs: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
        xs.iter().map(|x| self.project(x, k)).collect()
    }
}
