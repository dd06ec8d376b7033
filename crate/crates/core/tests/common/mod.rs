//! Loop-based reference implementations, deliberately written without the
//! library's Gram or centering helpers.
#![allow(dead_code)]

use ndarray::{Array2, ArrayView2};

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn rbf(sigma_sq: f64) -> impl Fn(&[f64], &[f64]) -> f64 {
    move |a, b| (-sq_dist(a, b) / (2.0 * sigma_sq)).exp()
}

pub fn imq(a: &[f64], b: &[f64]) -> f64 {
    1.0 / (sq_dist(a, b) + 1.0).sqrt()
}

fn rows(x: ArrayView2<f64>) -> Vec<Vec<f64>> {
    x.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Unbiased MMD², literal double sums.
pub fn mmd_u_sq(k: impl Fn(&[f64], &[f64]) -> f64, x: ArrayView2<f64>, y: ArrayView2<f64>) -> f64 {
    let (x, y) = (rows(x), rows(y));
    let (m, n) = (x.len() as f64, y.len() as f64);
    let mut xx = 0.0;
    for i in 0..x.len() {
        for j in 0..x.len() {
            if i != j {
                xx += k(&x[i], &x[j]);
            }
        }
    }
    let mut yy = 0.0;
    for i in 0..y.len() {
        for j in 0..y.len() {
            if i != j {
                yy += k(&y[i], &y[j]);
            }
        }
    }
    let mut xy = 0.0;
    for a in &x {
        for b in &y {
            xy += k(a, b);
        }
    }
    xx / (m * (m - 1.0)) + yy / (n * (n - 1.0)) - 2.0 * xy / (m * n)
}

fn gram(k: &dyn Fn(&[f64], &[f64]) -> f64, x: &[Vec<f64>]) -> Array2<f64> {
    Array2::from_shape_fn((x.len(), x.len()), |(i, j)| k(&x[i], &x[j]))
}

/// `(1/n²) tr(K H L H)` with explicit H and naive products.
pub fn hsic_trace(
    k: impl Fn(&[f64], &[f64]) -> f64,
    l: impl Fn(&[f64], &[f64]) -> f64,
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
) -> f64 {
    let (x, y) = (rows(x), rows(y));
    let n = x.len();
    let km = gram(&k, &x);
    let lm = gram(&l, &y);
    let h = Array2::from_shape_fn((n, n), |(i, j)| f64::from(u8::from(i == j)) - 1.0 / n as f64);
    let mul = |a: &Array2<f64>, b: &Array2<f64>| {
        Array2::from_shape_fn((n, n), |(i, j)| (0..n).map(|t| a[[i, t]] * b[[t, j]]).sum::<f64>())
    };
    let prod = mul(&mul(&mul(&km, &h), &lm), &h);
    (0..n).map(|i| prod[[i, i]]).sum::<f64>() / (n * n) as f64
}

/// The three-term expansion of HSIC_b, with `l` applied to Y in the last
/// term.
pub fn hsic_expanded(
    k: impl Fn(&[f64], &[f64]) -> f64,
    l: impl Fn(&[f64], &[f64]) -> f64,
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
) -> f64 {
    let (x, y) = (rows(x), rows(y));
    let n = x.len();
    let nf = n as f64;
    let km = gram(&k, &x);
    let lm = gram(&l, &y);
    let mut t1 = 0.0;
    for i in 0..n {
        for j in 0..n {
            t1 += km[[i, j]] * lm[[i, j]];
        }
    }
    let t2 = km.sum() * lm.sum();
    let mut t3 = 0.0;
    for i in 0..n {
        let ki: f64 = (0..n).map(|j| km[[i, j]]).sum();
        let li: f64 = (0..n).map(|q| lm[[i, q]]).sum();
        t3 += ki * li;
    }
    t1 / (nf * nf) + t2 / nf.powi(4) - 2.0 * t3 / nf.powi(3)
}

/// Median of pairwise distances (i < j), squared; mirrors the median trick
/// with its degenerate rules.
pub fn median_sigma_sq(x: ArrayView2<f64>) -> f64 {
    let x = rows(x);
    let mut d = Vec::new();
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            d.push(sq_dist(&x[i], &x[j]).sqrt());
        }
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let med = if m % 2 == 1 { d[m / 2] } else { 0.5 * (d[m / 2 - 1] + d[m / 2]) };
    if med > 0.0 {
        med * med
    } else {
        match d.iter().find(|&&v| v > 0.0) {
            Some(v) => v * v,
            None => 1.0,
        }
    }
}

/// Hand-set networks with known structure.
///
/// The decoder is one sigmoid layer whose pixel `p` fires when
/// `radius(z_dep) = r_mid + r_slope·z_dep` exceeds the pixel's distance to
/// the image centre, so it renders a disk growing with Z_dep. The encoder
/// maps the image's total intensity (≈ blob area) to Z_dep and zeros the
/// other axes.
pub fn planted_params(side: usize, d_z: usize, r_mid: f64, r_slope: f64) -> continuum::model::WaeParams {
    use continuum::autodiff::{Activation, Layer, MlpParams};
    use ndarray::Array1;
    let d_x = side * side;
    let sharp = 4.0;
    let half = side as f64 / 2.0;
    let rho = |p: usize| {
        let (r, c) = ((p / side) as f64 + 0.5 - half, (p % side) as f64 + 0.5 - half);
        (r * r + c * c).sqrt()
    };
    let mut dec_w = Array2::zeros((d_x, d_z));
    let mut dec_b = Array1::zeros(d_x);
    for p in 0..d_x {
        dec_w[[p, 0]] = sharp * r_slope;
        dec_b[p] = sharp * (r_mid - rho(p));
    }
    let area_mid = std::f64::consts::PI * r_mid * r_mid;
    let mut enc_w = Array2::zeros((d_z, d_x));
    enc_w.row_mut(0).fill(1.0 / area_mid);
    let mut enc_b = Array1::zeros(d_z);
    enc_b[0] = -1.0;
    continuum::model::WaeParams {
        encoder: MlpParams {
            layers: vec![Layer {
                weight: enc_w,
                bias: enc_b,
                activation: Activation::Identity,
            }],
        },
        decoder: MlpParams {
            layers: vec![Layer {
                weight: dec_w,
                bias: dec_b,
                activation: Activation::Sigmoid,
            }],
        },
    }
}

const FD_STEP: f64 = 1e-5;

fn param_mut(p: &mut continuum::model::WaeParams, net: usize, li: usize, bias: bool, i: usize) -> &mut f64 {
    let l = if net == 0 { &mut p.encoder.layers[li] } else { &mut p.decoder.layers[li] };
    if bias {
        &mut l.bias[i]
    } else {
        l.weight.iter_mut().nth(i).unwrap()
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Largest relative error between the analytic gradient of the full loss and
/// central finite differences, over every parameter of a small random model
/// (batch 8, d_z 4). Median bandwidths are resolved once and pinned.
pub fn gradient_check(seed: u64) -> f64 {
    use continuum::autodiff::GramKernel;
    use continuum::kernels::KernelSpec;
    use continuum::model::{prior_sample, LossGraph, TrainingConfig, WaeParams};
    use ndarray::Array1;
    use rand::Rng;

    let (n, d_x, d_z) = (8, 6, 4);
    let config = TrainingConfig {
        d_z,
        encoder_hidden: vec![5],
        decoder_hidden: vec![5],
        lambda_mmd: 3.0,
        lambda_ind: 5.0,
        lambda_dep: 2.0,
        ..TrainingConfig::default()
    };
    let mut rng = continuum::seeded_rng(seed, 0);
    let mut params = WaeParams::init(&config, d_x, &mut rng).unwrap();
    let x = Array2::from_shape_simple_fn((n, d_x), || rng.random::<f64>());
    let s = Array1::from_shape_simple_fn(n, || rng.random_range(1..=5) as f64);
    let prior = prior_sample(n, d_z, &mut rng).unwrap();

    let mut median = LossGraph::new(&params, n, &config).unwrap();
    let reference = median.evaluate(&params, x.view(), s.view(), &prior).unwrap();
    let (bi, bd, bs) = median.hsic_bandwidths();
    let fixed = |v: Option<f64>| GramKernel::Fixed(KernelSpec::Rbf { sigma_sq: v.unwrap() });
    let mut graph = LossGraph::with_hsic_kernels(&params, n, &config, [fixed(bi), fixed(bd), fixed(bs)]).unwrap();
    let pinned = graph.evaluate(&params, x.view(), s.view(), &prior).unwrap();
    assert_eq!(pinned.total, reference.total);
    let (ge, gd) = graph.gradients().unwrap();

    let mut worst: f64 = 0.0;
    for net in 0..2 {
        let n_layers = if net == 0 { params.encoder.layers.len() } else { params.decoder.layers.len() };
        for li in 0..n_layers {
            for bias in [false, true] {
                let len = {
                    let l = if net == 0 { &params.encoder.layers[li] } else { &params.decoder.layers[li] };
                    if bias { l.bias.len() } else { l.weight.len() }
                };
                for i in 0..len {
                    let orig = *param_mut(&mut params, net, li, bias, i);
                    *param_mut(&mut params, net, li, bias, i) = orig + FD_STEP;
                    let up = graph.evaluate(&params, x.view(), s.view(), &prior).unwrap().total;
                    *param_mut(&mut params, net, li, bias, i) = orig - FD_STEP;
                    let down = graph.evaluate(&params, x.view(), s.view(), &prior).unwrap().total;
                    *param_mut(&mut params, net, li, bias, i) = orig;
                    let numeric = (up - down) / (2.0 * FD_STEP);
                    let g = if net == 0 { &ge } else { &gd };
                    let analytic = if bias { g.biases[li][i] } else { *g.weights[li].iter().nth(i).unwrap() };
                    worst = worst.max(rel_err(analytic, numeric));
                }
            }
        }
    }
    worst
}
