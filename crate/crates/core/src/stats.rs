//! Kernel two-sample and independence statistics.
//!
//! * [`mmd_u_sq`]: unbiased quadratic-time estimate of MMD², which can be
//!   slightly negative when the two samples come from the same law.
//! * [`hsic_b`]: biased HSIC, `(1/n²) tr(K H L H)` with `H = I − 11ᵀ/n`.
//! * [`permutation_null`]: calibration of `hsic_b` by re-pairing the rows of Y.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::kernels::{gram, KernelError, KernelSpec};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least 2 samples in each set, got {0}")]
    TooFewSamples(usize),

    #[error("paired samples need equal row counts, got {0} and {1}")]
    RowMismatch(usize, usize),

    #[error("permutation count must be at least {min}, got {got}")]
    TooFewPermutations { min: usize, got: usize },

    #[error(transparent)]
    Kernel(#[from] KernelError),
}

pub const MIN_PERMUTATIONS: usize = 50;
pub const DEFAULT_PERMUTATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct MmdEstimate {
    pub value: f64,
    pub m: usize,
    pub n: usize,
    pub spec: KernelSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsicEstimate {
    pub value: f64,
    pub n: usize,
    pub spec_x: KernelSpec,
    pub spec_y: KernelSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermutationNull {
    /// Null statistics, ascending.
    pub null: Vec<f64>,
    pub observed: f64,
    pub p_value: f64,
}

impl PermutationNull {
    /// Empirical quantile of the null (nearest-rank, `q` in [0, 1]).
    pub fn quantile(&self, q: f64) -> f64 {
        let b = self.null.len();
        let rank = ((q * b as f64).ceil() as usize).clamp(1, b);
        self.null[rank - 1]
    }
}

fn sum_off_diagonal(k: &Array2<f64>) -> f64 {
    k.sum() - k.diag().sum()
}

/// Unbiased MMD² between the rows of `x` (m samples) and `y` (n samples).
pub fn mmd_u_sq(spec: &KernelSpec, x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<MmdEstimate, StatsError> {
    let (m, n) = (x.nrows(), y.nrows());
    if m < 2 || n < 2 {
        return Err(StatsError::TooFewSamples(m.min(n)));
    }
    let kxx = gram(spec, x, x)?;
    let kyy = gram(spec, y, y)?;
    let kxy = gram(spec, x, y)?;
    let (mf, nf) = (m as f64, n as f64);
    let value = sum_off_diagonal(&kxx) / (mf * (mf - 1.0)) + sum_off_diagonal(&kyy) / (nf * (nf - 1.0))
        - 2.0 * kxy.sum() / (mf * nf);
    Ok(MmdEstimate {
        value,
        m,
        n,
        spec: *spec,
    })
}

/// `H K H` for a square matrix: subtract row means and column means, add
/// back the grand mean.
pub fn double_center(k: &Array2<f64>) -> Array2<f64> {
    let n = k.nrows() as f64;
    let row_means = k.sum_axis(ndarray::Axis(1)) / n;
    let col_means = k.sum_axis(ndarray::Axis(0)) / n;
    let grand = k.sum() / (n * n);
    let mut out = k.clone();
    for ((i, j), v) in out.indexed_iter_mut() {
        *v += grand - row_means[i] - col_means[j];
    }
    out
}

/// `(1/n²) tr(K H L H)` from the two Gram matrices.
///
/// Uses `tr(K H L H) = Σ_ij (H K H)_ij L_ij` (L symmetric), which is the same
/// trace in O(n²) instead of three O(n³) products.
fn hsic_from_grams(k: &Array2<f64>, l: &Array2<f64>) -> f64 {
    let n = k.nrows() as f64;
    let kc = double_center(k);
    (&kc * l).sum() / (n * n)
}

fn check_paired(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<usize, StatsError> {
    if x.nrows() != y.nrows() {
        return Err(StatsError::RowMismatch(x.nrows(), y.nrows()));
    }
    if x.nrows() < 2 {
        return Err(StatsError::TooFewSamples(x.nrows()));
    }
    Ok(x.nrows())
}

/// Biased HSIC between paired samples; `k` acts on rows of `x`, `l` on rows of `y`.
pub fn hsic_b(
    spec_k: &KernelSpec,
    spec_l: &KernelSpec,
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
) -> Result<HsicEstimate, StatsError> {
    let n = check_paired(x, y)?;
    let k = gram(spec_k, x, x)?;
    let l = gram(spec_l, y, y)?;
    Ok(HsicEstimate {
        value: hsic_from_grams(&k, &l),
        n,
        spec_x: *spec_k,
        spec_y: *spec_l,
    })
}

/// Permutation null for `hsic_b`: the statistic is recomputed for `b`
/// random row permutations of `y` (X fixed). The p-value counts the observed
/// statistic itself, so it is never below `1 / (b + 1)`.
pub fn permutation_null<R: Rng + ?Sized>(
    spec_k: &KernelSpec,
    spec_l: &KernelSpec,
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    b: usize,
    rng: &mut R,
) -> Result<PermutationNull, StatsError> {
    let n = check_paired(x, y)?;
    if b < MIN_PERMUTATIONS {
        return Err(StatsError::TooFewPermutations {
            min: MIN_PERMUTATIONS,
            got: b,
        });
    }
    let kc = double_center(&gram(spec_k, x, x)?);
    let l = gram(spec_l, y, y)?;
    let nn = (n * n) as f64;

    // Permuting the rows of Y permutes rows and columns of L together.
    let statistic = |perm: &[usize]| -> f64 {
        let mut acc = 0.0;
        for (i, &pi) in perm.iter().enumerate() {
            let kc_row = kc.row(i);
            let l_row = l.row(pi);
            for (j, &pj) in perm.iter().enumerate() {
                acc += kc_row[j] * l_row[pj];
            }
        }
        acc / nn
    };

    let mut perm: Vec<usize> = (0..n).collect();
    let observed = statistic(&perm);
    let mut null = Vec::with_capacity(b);
    for _ in 0..b {
        perm.shuffle(rng);
        null.push(statistic(&perm));
    }
    null.sort_by(f64::total_cmp);
    let exceed = null.iter().filter(|&&v| v >= observed).count();
    Ok(PermutationNull {
        p_value: (1 + exceed) as f64 / (b + 1) as f64,
        null,
        observed,
    })
}
