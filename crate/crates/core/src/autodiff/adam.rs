//! Adam with bias correction, applied to a whole [`MlpParams`].

use ndarray::Zip;
use thiserror::Error;

use super::mlp::{MlpGrads, MlpParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdamError {
    #[error("gradient shapes do not match parameters (layer {layer})")]
    ShapeMismatch { layer: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Moment estimates for one parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: MlpGrads,
    pub v: MlpGrads,
    pub t: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(params: &MlpParams, config: AdamConfig) -> Self {
        AdamState {
            m: MlpGrads::zeros_like(params),
            v: MlpGrads::zeros_like(params),
            t: 0,
            config,
        }
    }
}

/// One bias-corrected Adam update of every tensor in `params`.
pub fn adam_step(params: &mut MlpParams, grads: &MlpGrads, state: &mut AdamState) -> Result<(), AdamError> {
    let n = params.layers.len();
    if grads.weights.len() != n || grads.biases.len() != n || state.m.weights.len() != n {
        return Err(AdamError::ShapeMismatch { layer: n.min(grads.weights.len()) });
    }
    for (i, layer) in params.layers.iter().enumerate() {
        let w = layer.weight.dim();
        let b = layer.bias.len();
        if grads.weights[i].dim() != w
            || grads.biases[i].len() != b
            || state.m.weights[i].dim() != w
            || state.v.biases[i].len() != b
        {
            return Err(AdamError::ShapeMismatch { layer: i });
        }
    }

    state.t += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        eps,
    } = state.config;
    let t = state.t as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let update = |p: &mut f64, &g: &f64, m: &mut f64, v: &mut f64| {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= learning_rate * m_hat / (v_hat.sqrt() + eps);
    };

    for (i, layer) in params.layers.iter_mut().enumerate() {
        Zip::from(&mut layer.weight)
            .and(&grads.weights[i])
            .and(&mut state.m.weights[i])
            .and(&mut state.v.weights[i])
            .for_each(update);
        Zip::from(&mut layer.bias)
            .and(&grads.biases[i])
            .and(&mut state.m.biases[i])
            .and(&mut state.v.biases[i])
            .for_each(update);
    }
    Ok(())
}
