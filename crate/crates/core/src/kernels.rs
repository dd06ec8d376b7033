//! Kernel functions and Gram matrices.
//!
//! Two kernels are supported, both functions of the squared Euclidean
//! distance only:
//!
//! | kernel | k(x, y)                         |
//! |--------|---------------------------------|
//! | RBF    | exp(-‖x − y‖² / (2σ²))          |
//! | IMQ    | 1 / sqrt(‖x − y‖² + 1)          |
//!
//! The RBF bandwidth is normally picked with [`median_heuristic`]: σ is the
//! median Euclidean distance over all distinct pairs, and σ² is returned.

use ndarray::{Array2, ArrayView1, ArrayView2};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("RBF bandwidth must be positive and finite, got σ² = {0}")]
    InvalidBandwidth(f64),

    #[error("median heuristic needs at least 2 rows, got {0}")]
    TooFewRows(usize),
}

/// Kernel choice with its (already resolved) parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Rbf { sigma_sq: f64 },
    /// Inverse multiquadratic with offset fixed at 1.
    Imq,
}

/// Gram matrix of kernel evaluations, rows indexed by the first sample set.
pub type GramMatrix = Array2<f64>;

impl KernelSpec {
    pub fn rbf(sigma_sq: f64) -> Result<Self, KernelError> {
        if !(sigma_sq > 0.0 && sigma_sq.is_finite()) {
            return Err(KernelError::InvalidBandwidth(sigma_sq));
        }
        Ok(KernelSpec::Rbf { sigma_sq })
    }

    /// RBF kernel whose bandwidth comes from the median heuristic on `x`.
    pub fn rbf_median(x: ArrayView2<f64>) -> Result<Self, KernelError> {
        Ok(KernelSpec::Rbf {
            sigma_sq: median_heuristic(x)?,
        })
    }

    /// Kernel value as a function of the squared distance.
    #[inline]
    pub fn from_sq_dist(&self, sq_dist: f64) -> f64 {
        match *self {
            KernelSpec::Rbf { sigma_sq } => (-sq_dist / (2.0 * sigma_sq)).exp(),
            KernelSpec::Imq => 1.0 / (sq_dist + 1.0).sqrt(),
        }
    }

    /// Derivative of [`Self::from_sq_dist`] w.r.t. the squared distance,
    /// written in terms of the kernel value `k` at that distance.
    #[inline]
    pub fn d_sq_dist(&self, k: f64) -> f64 {
        match *self {
            KernelSpec::Rbf { sigma_sq } => -k / (2.0 * sigma_sq),
            KernelSpec::Imq => -0.5 * k * k * k,
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        if x.len() != y.len() {
            return Err(KernelError::DimensionMismatch(x.len(), y.len()));
        }
        Ok(self.from_sq_dist(sq_dist(x.iter().copied(), y.iter().copied())))
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Rbf { .. } => "rbf",
            KernelSpec::Imq => "imq",
        }
    }
}

#[inline]
fn sq_dist(x: impl Iterator<Item = f64>, y: impl Iterator<Item = f64>) -> f64 {
    x.zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Squared Euclidean distance between two rows.
#[inline]
pub fn row_sq_dist(x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    sq_dist(x.iter().copied(), y.iter().copied())
}

/// Matrix of squared distances between the rows of `x` and the rows of `y`.
pub fn pairwise_sq_dists(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<Array2<f64>, KernelError> {
    if x.ncols() != y.ncols() {
        return Err(KernelError::DimensionMismatch(x.ncols(), y.ncols()));
    }
    let mut out = Array2::zeros((x.nrows(), y.nrows()));
    for (i, xi) in x.rows().into_iter().enumerate() {
        for (j, yj) in y.rows().into_iter().enumerate() {
            out[[i, j]] = row_sq_dist(xi, yj);
        }
    }
    Ok(out)
}

/// Gram matrix with entry (i, j) = k(x_i, y_j).
pub fn gram(spec: &KernelSpec, x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<GramMatrix, KernelError> {
    let mut d = pairwise_sq_dists(x, y)?;
    d.mapv_inplace(|v| spec.from_sq_dist(v));
    Ok(d)
}

/// Median-trick bandwidth σ² for the rows of `x`.
///
/// σ is the median Euclidean distance over unordered pairs i < j (mean of the
/// two middle values for an even pair count). A zero median falls back to the
/// smallest nonzero distance; if every distance is zero the result is 1.
pub fn median_heuristic(x: ArrayView2<f64>) -> Result<f64, KernelError> {
    let n = x.nrows();
    if n < 2 {
        return Err(KernelError::TooFewRows(n));
    }
    let mut sq = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            sq.push(row_sq_dist(x.row(i), x.row(j)));
        }
    }
    Ok(median_sigma_sq(sq))
}

/// Median-trick σ² from a list of pairwise *squared* distances (one entry per
/// unordered pair). Shared by [`median_heuristic`] and the autodiff Gram node.
pub fn median_sigma_sq(sq_dists: Vec<f64>) -> f64 {
    let mut dists: Vec<f64> = sq_dists.into_iter().map(f64::sqrt).collect();
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    let sigma = if median > 0.0 {
        median
    } else {
        match dists.iter().copied().find(|&d| d > 0.0) {
            Some(d) => d,
            None => return 1.0,
        }
    };
    sigma * sigma
}
