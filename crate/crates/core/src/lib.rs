//! Side-information-regularized Wasserstein auto-encoders.
//!
//! The crate is split into:
//!
//! - [`autodiff`]: a small static-graph reverse-mode AD engine, MLPs and Adam.
//! - [`kernels`]: RBF / IMQ kernels, Gram matrices, median-trick bandwidth.
//! - [`stats`]: unbiased MMD², biased HSIC and a permutation null for HSIC.
//! - [`model`]: the regularized WAE loss, training loop and checkpoints.
//! - [`synth`]: a synthetic dataset of blobs whose size tracks a side label.
//! - [`eval`]: nearest-neighbour regression, first principal component,
//!   per-level KDE and per-axis correlations.
//! - [`table`]: CSV helpers shared by the exporters and importers.

pub mod autodiff;
pub mod eval;
pub mod kernels;
pub mod model;
pub mod stats;
pub mod synth;
pub mod table;

/// Seeded generator used everywhere randomness is needed.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Deterministic generator for `seed` on an independent stream.
pub fn seeded_rng(seed: u64, stream: u64) -> Rng {
    use rand::SeedableRng;
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One standard normal draw by the Box-Muller transform (cosine branch).
pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    let (a, _) = box_muller_pair(rng);
    a
}

/// Two independent standard normal draws from two uniforms.
pub fn box_muller_pair<R: rand::Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // 1 − u keeps the log argument in (0, 1]
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    let radius = (-2.0 * u1.ln()).sqrt();
    let (sin, cos) = (2.0 * std::f64::consts::PI * u2).sin_cos();
    (radius * cos, radius * sin)
}
