//! Evaluation of a trained model: nearest-neighbour regression of side
//! information on generated samples, the latent scatter (Z_dep against the
//! first principal component of Z_ind), per-level KDE curves and per-axis
//! correlations.

use std::cmp::Ordering;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use thiserror::Error;

use crate::autodiff::MlpParams;
use crate::model::{prior_sample, ModelError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("test set is empty")]
    EmptyTestSet,

    #[error("k = {k} neighbours requested but the test set has {n} rows")]
    KTooLarge { k: usize, n: usize },

    #[error("k must be at least 1")]
    ZeroK,

    #[error("need at least {min} generated samples, got {got}")]
    TooFewGenerated { min: usize, got: usize },

    #[error("need at least {need} rows, got {have}")]
    TooFewRows { need: usize, have: usize },

    #[error("{a} rows paired with {b} rows")]
    RowMismatch { a: usize, b: usize },

    #[error("input has no columns")]
    NoColumns,

    #[error("generated samples have {generated} features, test images have {test}")]
    FeatureMismatch { generated: usize, test: usize },

    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Anything that maps latent codes to images.
pub trait Generator {
    fn latent_dim(&self) -> usize;
    fn generate(&self, z: ArrayView2<f64>) -> Result<Array2<f64>, EvalError>;
}

impl Generator for MlpParams {
    fn latent_dim(&self) -> usize {
        self.input_dim()
    }

    fn generate(&self, z: ArrayView2<f64>) -> Result<Array2<f64>, EvalError> {
        Ok(self.apply(z).map_err(ModelError::from)?)
    }
}

pub const MIN_GENERATED: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegressionMode {
    /// One (z_dep, s) pair per neighbour: k·n_gen points.
    #[default]
    Pooled,
    /// One (z_dep, mean neighbour s) pair per generated sample.
    Averaged,
}

impl RegressionMode {
    pub fn name(self) -> &'static str {
        match self {
            RegressionMode::Pooled => "pooled",
            RegressionMode::Averaged => "averaged",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "pooled" => Some(RegressionMode::Pooled),
            "averaged" => Some(RegressionMode::Averaged),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Pearson r of the fitted pairs; 0 when either side is constant.
    pub r: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`. With constant `x` the
/// slope is 0 and the intercept is the mean of `y`.
pub fn ols(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxx += da * da;
        syy += db * db;
        sxy += da * db;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r = if sxx > 0.0 && syy > 0.0 {
        (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSample {
    pub z_dep: f64,
    pub neighbours: Vec<usize>,
    pub neighbour_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnRegressionReport {
    pub k: usize,
    pub mode: RegressionMode,
    pub samples: Vec<GeneratedSample>,
    pub fit: LinearFit,
}

impl NnRegressionReport {
    /// The (z_dep, s) pairs the fit was computed on.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        match self.mode {
            RegressionMode::Pooled => self
                .samples
                .iter()
                .flat_map(|g| g.neighbour_s.iter().map(move |&s| (g.z_dep, s)))
                .collect(),
            RegressionMode::Averaged => self
                .samples
                .iter()
                .map(|g| (g.z_dep, g.neighbour_s.iter().sum::<f64>() / g.neighbour_s.len() as f64))
                .collect(),
        }
    }
}

/// Indices of the `k` rows of `pool` closest to `query` in squared L2, ties
/// broken by index.
pub fn nearest(pool: ArrayView2<f64>, query: ArrayView1<f64>, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = pool
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| (row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Draws `n_gen` prior codes, decodes them, and regresses the side
/// information of each sample's `k` nearest test images on its Z_dep.
pub fn nn_regress<G: Generator + ?Sized, R: Rng + ?Sized>(
    generator: &G,
    test_x: ArrayView2<f64>,
    test_s: ArrayView1<f64>,
    k: usize,
    n_gen: usize,
    mode: RegressionMode,
    rng: &mut R,
) -> Result<NnRegressionReport, EvalError> {
    let n = test_x.nrows();
    if n == 0 {
        return Err(EvalError::EmptyTestSet);
    }
    if test_s.len() != n {
        return Err(EvalError::RowMismatch { a: n, b: test_s.len() });
    }
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    if k > n {
        return Err(EvalError::KTooLarge { k, n });
    }
    if n_gen < MIN_GENERATED {
        return Err(EvalError::TooFewGenerated {
            min: MIN_GENERATED,
            got: n_gen,
        });
    }
    let z = prior_sample(n_gen, generator.latent_dim(), rng)?;
    let images = generator.generate(z.view())?;
    if images.ncols() != test_x.ncols() {
        return Err(EvalError::FeatureMismatch {
            generated: images.ncols(),
            test: test_x.ncols(),
        });
    }
    let samples: Vec<GeneratedSample> = images
        .rows()
        .into_iter()
        .zip(z.column(0))
        .map(|(img, &z_dep)| {
            let neighbours = nearest(test_x, img, k);
            let neighbour_s = neighbours.iter().map(|&i| test_s[i]).collect();
            GeneratedSample {
                z_dep,
                neighbours,
                neighbour_s,
            }
        })
        .collect();
    let mut report = NnRegressionReport {
        k,
        mode,
        samples,
        fit: LinearFit {
            slope: 0.0,
            intercept: 0.0,
            r: 0.0,
        },
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = report.pairs().into_iter().unzip();
    report.fit = ols(&xs, &ys);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalComponent {
    /// Unit vector, largest-magnitude component positive.
    pub direction: Array1<f64>,
    /// Projections of the centred rows onto `direction`.
    pub projections: Array1<f64>,
    /// Variance along `direction` (denominator n − 1).
    pub variance: f64,
    /// True when the covariance is zero and `direction` is e1 by convention.
    pub degenerate: bool,
}

const PC_TOL: f64 = 1e-10;
const PC_MAX_ITER: usize = 1000;

fn fix_sign(v: &mut Array1<f64>) {
    let lead = v
        .iter()
        .copied()
        .max_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap_or(Ordering::Equal))
        .unwrap_or(0.0);
    if lead < 0.0 {
        v.mapv_inplace(|x| -x);
    }
}

fn power_iterate(cov: &Array2<f64>, mut v: Array1<f64>) -> Array1<f64> {
    v /= v.dot(&v).sqrt();
    fix_sign(&mut v);
    for _ in 0..PC_MAX_ITER {
        let mut next = cov.dot(&v);
        let norm = next.dot(&next).sqrt();
        if norm == 0.0 {
            break;
        }
        next /= norm;
        fix_sign(&mut next);
        let change = (&next - &v).mapv(|x| x * x).sum().sqrt();
        v = next;
        if change < PC_TOL {
            break;
        }
    }
    v
}

/// First principal component by power iteration on the sample covariance.
/// Every nonzero covariance column seeds one run and the run with the
/// largest Rayleigh quotient wins, so no start is orthogonal to all leading
/// directions.
pub fn first_pc(x: ArrayView2<f64>) -> Result<PrincipalComponent, EvalError> {
    let (n, d) = x.dim();
    if d == 0 {
        return Err(EvalError::NoColumns);
    }
    if n < 2 {
        return Err(EvalError::TooFewRows { need: 2, have: n });
    }
    let mean = x.mean_axis(Axis(0)).expect("n >= 2");
    let centred = &x - &mean;
    let cov = centred.t().dot(&centred) / (n as f64 - 1.0);

    let mut best: Option<(f64, Array1<f64>)> = None;
    for j in 0..d {
        let start = cov.column(j).to_owned();
        if start.iter().all(|&v| v == 0.0) {
            continue;
        }
        let v = power_iterate(&cov, start);
        let rq = v.dot(&cov.dot(&v));
        if best.as_ref().is_none_or(|(b, _)| rq > *b) {
            best = Some((rq, v));
        }
    }
    let (direction, degenerate) = match best {
        Some((_, v)) => (v, false),
        None => {
            let mut e1 = Array1::zeros(d);
            e1[0] = 1.0;
            (e1, true)
        }
    };
    let projections = centred.dot(&direction);
    let variance = projections.dot(&projections) / (n as f64 - 1.0);
    Ok(PrincipalComponent {
        direction,
        projections,
        variance,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentScatter {
    pub z_dep: Array1<f64>,
    pub pc1: Array1<f64>,
    pub levels: Array1<f64>,
    pub pc: PrincipalComponent,
}

/// Z_dep (column 0) against the projection of Z_ind (columns 1..) on its
/// first principal component.
pub fn latent_scatter(z: ArrayView2<f64>, s: ArrayView1<f64>) -> Result<LatentScatter, EvalError> {
    if z.nrows() != s.len() {
        return Err(EvalError::RowMismatch { a: z.nrows(), b: s.len() });
    }
    if z.ncols() < 2 {
        return Err(EvalError::NoColumns);
    }
    let pc = first_pc(z.slice(ndarray::s![.., 1..]))?;
    Ok(LatentScatter {
        z_dep: z.column(0).to_owned(),
        pc1: pc.projections.clone(),
        levels: s.to_owned(),
        pc,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeCurve {
    pub level: f64,
    pub count: usize,
    pub bandwidth: f64,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeReport {
    pub grid: Vec<f64>,
    pub curves: Vec<KdeCurve>,
    /// Levels with fewer than 2 points, with their counts.
    pub skipped: Vec<(f64, usize)>,
}

/// Silverman's rule `1.06·σ̂·n^(−1/5)`, σ̂ the sample standard deviation.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    1.06 * var.sqrt() * n.powf(-0.2)
}

/// Gaussian KDE at `x` with bandwidth `h`.
pub fn gaussian_kde(values: &[f64], h: f64, x: f64) -> f64 {
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    values.iter().map(|v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum::<f64>() * norm
}

/// Distinct label values in ascending order.
pub fn distinct_levels(labels: ArrayView1<f64>) -> Vec<f64> {
    let mut levels: Vec<f64> = labels.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels
}

/// Per-level Gaussian KDE of `values` on a shared grid. A level whose sample
/// standard deviation is zero falls back to a bandwidth of 1e-3 of the grid
/// span.
pub fn kde_1d(values: ArrayView1<f64>, labels: ArrayView1<f64>, grid: &[f64]) -> Result<KdeReport, EvalError> {
    if values.len() != labels.len() {
        return Err(EvalError::RowMismatch {
            a: values.len(),
            b: labels.len(),
        });
    }
    let span = match (grid.first(), grid.last()) {
        (Some(a), Some(b)) => (b - a).abs(),
        _ => 0.0,
    };
    let fallback = if span > 0.0 { 1e-3 * span } else { 1e-3 };
    let mut curves = Vec::new();
    let mut skipped = Vec::new();
    for level in distinct_levels(labels) {
        let pts: Vec<f64> = values
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == level)
            .map(|(&v, _)| v)
            .collect();
        if pts.len() < 2 {
            skipped.push((level, pts.len()));
            continue;
        }
        let h = silverman_bandwidth(&pts);
        let h = if h > 0.0 && h.is_finite() { h } else { fallback };
        curves.push(KdeCurve {
            level,
            count: pts.len(),
            bandwidth: h,
            density: grid.iter().map(|&x| gaussian_kde(&pts, h, x)).collect(),
        });
    }
    Ok(KdeReport {
        grid: grid.to_vec(),
        curves,
        skipped,
    })
}

/// Evenly spaced grid covering the data plus `pad` on each side.
pub fn linspace_grid(values: ArrayView1<f64>, pad: f64, points: usize) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - pad;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + pad;
    if points < 2 || hi.partial_cmp(&lo) != Some(Ordering::Greater) {
        return vec![lo; points.max(1)];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| lo + step * i as f64).collect()
}

/// Grid for [`kde_1d`] wide enough for every level's curve to integrate to
/// one: the data range padded by five times the largest Silverman bandwidth.
pub fn kde_grid(values: ArrayView1<f64>, labels: ArrayView1<f64>, points: usize) -> Vec<f64> {
    let widest = distinct_levels(labels)
        .into_iter()
        .filter_map(|level| {
            let pts: Vec<f64> = values.iter().zip(labels).filter(|(_, &l)| l == level).map(|(&v, _)| v).collect();
            (pts.len() >= 2).then(|| silverman_bandwidth(&pts))
        })
        .filter(|h| h.is_finite())
        .fold(0.0, f64::max);
    linspace_grid(values, 5.0 * widest.max(1e-3), points)
}

/// Trapezoid rule.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisCorrelation {
    pub axis: usize,
    pub pearson: f64,
    pub spearman: f64,
    /// The axis or S is constant; both correlations are reported as 0.
    pub zero_variance: bool,
}

/// Ranks starting at 1, ties receiving the mean of their positions.
pub fn average_ranks(v: ArrayView1<f64>) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson and Spearman correlation of every latent axis with `s`.
pub fn correlations(z: ArrayView2<f64>, s: ArrayView1<f64>) -> Result<Vec<AxisCorrelation>, EvalError> {
    let n = z.nrows();
    if s.len() != n {
        return Err(EvalError::RowMismatch { a: n, b: s.len() });
    }
    if n < 3 {
        return Err(EvalError::TooFewRows { need: 3, have: n });
    }
    let s_vec = s.to_vec();
    let s_rank = average_ranks(s);
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    let s_const = constant(&s_vec);
    Ok(z
        .columns()
        .into_iter()
        .enumerate()
        .map(|(axis, col)| {
            let c = col.to_vec();
            if s_const || constant(&c) {
                return AxisCorrelation {
                    axis,
                    pearson: 0.0,
                    spearman: 0.0,
                    zero_variance: true,
                };
            }
            AxisCorrelation {
                axis,
                pearson: ols(&c, &s_vec).r,
                spearman: ols(&average_ranks(col), &s_rank).r,
                zero_variance: false,
            }
        })
        .collect())
}
