//! The side-information-regularized Wasserstein auto-encoder.
//!
//! Loss on a batch `(X, S)` with a deterministic encoder `Q` and decoder `G`:
//!
//! ```text
//! total = recon + λ1·MMD²(Q(X), P) + λ2·HSIC(Z_ind, S) − λ3·HSIC(Z_dep, S)
//! ```
//!
//! `recon` is the batch mean of ‖x − G(Q(x))‖², `P` is a fresh batch-sized
//! sample from the standard normal prior, the MMD uses the IMQ kernel and
//! both HSIC terms use RBF kernels. `Z_dep` is latent column 0 and `Z_ind`
//! the remaining columns.

mod checkpoint;
mod config;
mod loss;
mod train;

pub use checkpoint::{parse_checkpoint, read_checkpoint, render_checkpoint, write_checkpoint, CheckpointError};
pub use config::{BandwidthPolicy, ConfigError, TrainingConfig};
pub use loss::{compute_loss, decode, encode, prior_sample, side_info_from_matrix, LatentPartition, LossBreakdown, LossGraph};
pub use train::{train, train_from, TrainOutcome};

use ndarray::Array2;
use thiserror::Error;

use crate::autodiff::{Activation, AdamError, GraphError, MlpError, MlpParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("batch has {x} data rows but {s} side-information rows")]
    RowMismatch { x: usize, s: usize },

    #[error("estimators need at least 2 rows, batch has {0}")]
    BatchTooSmall(usize),

    #[error("side information must be a single column, got {0}")]
    SideInfoWidth(usize),

    #[error("non-finite side information at row {0}")]
    NonFiniteSideInfo(usize),

    #[error("need {need} training rows for one batch, dataset has {have}")]
    NotEnoughRows { need: usize, have: usize },

    #[error("non-finite loss at step {step}: {source}")]
    NonFinite { step: usize, source: GraphError },

    #[error("prior sample needs n >= 1 and d_z >= 1, got n = {n}, d_z = {d_z}")]
    PriorShape { n: usize, d_z: usize },

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error(transparent)]
    Mlp(#[from] MlpError),

    #[error(transparent)]
    Adam(#[from] AdamError),
}

/// Encoder and decoder parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct WaeParams {
    pub encoder: MlpParams,
    pub decoder: MlpParams,
}

impl WaeParams {
    /// Glorot-initialized encoder `d_x → hidden… → d_z` (leaky ReLU, linear
    /// output) and decoder `d_z → hidden… → d_x` (leaky ReLU, sigmoid output).
    pub fn init<R: rand::Rng + ?Sized>(config: &TrainingConfig, d_x: usize, rng: &mut R) -> Result<Self, ModelError> {
        let enc_dims: Vec<usize> = std::iter::once(d_x)
            .chain(config.encoder_hidden.iter().copied())
            .chain(std::iter::once(config.d_z))
            .collect();
        let dec_dims: Vec<usize> = std::iter::once(config.d_z)
            .chain(config.decoder_hidden.iter().copied())
            .chain(std::iter::once(d_x))
            .collect();
        let acts = |n: usize, last: Activation| {
            let mut v = vec![Activation::LeakyRelu; n - 2];
            v.push(last);
            v
        };
        Ok(WaeParams {
            encoder: MlpParams::init(&enc_dims, &acts(enc_dims.len(), Activation::Identity), rng)?,
            decoder: MlpParams::init(&dec_dims, &acts(dec_dims.len(), Activation::Sigmoid), rng)?,
        })
    }

    pub fn d_z(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn d_x(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn reconstruct(&self, x: &Array2<f64>) -> Result<Array2<f64>, ModelError> {
        let z = self.encoder.apply(x.view())?;
        Ok(self.decoder.apply(z.view())?)
    }
}
