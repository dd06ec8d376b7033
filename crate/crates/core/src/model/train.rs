use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;

use super::loss::{prior_sample, LossBreakdown, LossGraph};
use super::{ModelError, TrainingConfig, WaeParams};
use crate::autodiff::{adam_step, AdamConfig, AdamState, GraphError};
use crate::seeded_rng;

/// RNG streams derived from the config seed.
const STREAM_INIT: u64 = 10;
const STREAM_SHUFFLE: u64 = 11;
const STREAM_PRIOR: u64 = 12;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: WaeParams,
    /// One entry per completed step.
    pub trace: Vec<LossBreakdown>,
}

/// Trains from a fresh initialization drawn from `config.seed`.
pub fn train(config: &TrainingConfig, images: &Array2<f64>, side_info: &Array1<f64>) -> Result<TrainOutcome, ModelError> {
    config.validate()?;
    let params = WaeParams::init(config, images.ncols(), &mut seeded_rng(config.seed, STREAM_INIT))?;
    train_from(config, params, images, side_info)
}

/// Trains starting from `params`. Batches are drawn without replacement
/// within an epoch; each epoch reshuffles and drops the final partial batch.
pub fn train_from(
    config: &TrainingConfig,
    mut params: WaeParams,
    images: &Array2<f64>,
    side_info: &Array1<f64>,
) -> Result<TrainOutcome, ModelError> {
    config.validate()?;
    let n = images.nrows();
    if side_info.len() != n {
        return Err(ModelError::RowMismatch { x: n, s: side_info.len() });
    }
    if let Some(i) = side_info.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteSideInfo(i));
    }
    let b = config.batch_size;
    if n < b {
        return Err(ModelError::NotEnoughRows { need: b, have: n });
    }
    let mut trace = Vec::with_capacity(config.steps);
    if config.steps == 0 {
        return Ok(TrainOutcome { params, trace });
    }

    let mut shuffle_rng = seeded_rng(config.seed, STREAM_SHUFFLE);
    let mut prior_rng = seeded_rng(config.seed, STREAM_PRIOR);
    let adam = AdamConfig::with_learning_rate(config.learning_rate);
    let mut enc_state = AdamState::new(&params.encoder, adam);
    let mut dec_state = AdamState::new(&params.decoder, adam);
    let mut graph = LossGraph::new(&params, b, config)?;

    let mut order: Vec<usize> = (0..n).collect();
    let batches_per_epoch = n / b;
    let mut cursor = batches_per_epoch;
    for step in 0..config.steps {
        if cursor == batches_per_epoch {
            order.shuffle(&mut shuffle_rng);
            cursor = 0;
        }
        let rows = &order[cursor * b..(cursor + 1) * b];
        cursor += 1;
        let x = images.select(Axis(0), rows);
        let s = side_info.select(Axis(0), rows);
        let prior = prior_sample(b, params.d_z(), &mut prior_rng)?;

        let loss = graph.evaluate(&params, x.view(), s.view(), &prior).map_err(|e| abort(step, e))?;
        let (g_enc, g_dec) = graph.gradients().map_err(|e| abort(step, e))?;
        adam_step(&mut params.encoder, &g_enc, &mut enc_state)?;
        adam_step(&mut params.decoder, &g_dec, &mut dec_state)?;
        trace.push(loss);
    }
    Ok(TrainOutcome { params, trace })
}

fn abort(step: usize, e: ModelError) -> ModelError {
    match e {
        ModelError::Graph(source @ GraphError::NonFinite { .. }) => ModelError::NonFinite { step, source },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tiny_config(steps: usize) -> TrainingConfig {
        TrainingConfig {
            d_z: 3,
            encoder_hidden: vec![8],
            decoder_hidden: vec![8],
            batch_size: 8,
            steps,
            seed: 3,
            ..TrainingConfig::default()
        }
    }

    fn data(n: usize, d: usize) -> (Array2<f64>, Array1<f64>) {
        let mut rng = seeded_rng(99, 0);
        let x = Array2::from_shape_simple_fn((n, d), || rng.random::<f64>());
        let s = Array1::from_shape_fn(n, |i| (i % 5 + 1) as f64);
        (x, s)
    }

    #[test]
    fn zero_steps_leaves_params() {
        let cfg = tiny_config(0);
        let (x, s) = data(20, 6);
        let out = train(&cfg, &x, &s).unwrap();
        let init = WaeParams::init(&cfg, 6, &mut seeded_rng(cfg.seed, STREAM_INIT)).unwrap();
        assert_eq!(out.params, init);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn deterministic_trace() {
        let cfg = tiny_config(15);
        let (x, s) = data(20, 6);
        let a = train(&cfg, &x, &s).unwrap();
        let b = train(&cfg, &x, &s).unwrap();
        assert_eq!(a.trace.len(), 15);
        for (p, q) in a.trace.iter().zip(&b.trace) {
            assert_eq!(p.total.to_bits(), q.total.to_bits());
        }
        assert_eq!(a.params, b.params);
        for lb in &a.trace {
            assert_eq!(lb.total, lb.recompose());
        }
    }

    #[test]
    fn too_few_rows() {
        let cfg = tiny_config(1);
        let (x, s) = data(7, 6);
        assert_eq!(
            train(&cfg, &x, &s).unwrap_err(),
            ModelError::NotEnoughRows { need: 8, have: 7 }
        );
    }

    #[test]
    fn non_finite_aborts_with_step() {
        let cfg = TrainingConfig {
            learning_rate: 1e300,
            ..tiny_config(50)
        };
        let (x, s) = data(16, 6);
        match train(&cfg, &x, &s) {
            Err(ModelError::NonFinite { step, .. }) => assert!((1..50).contains(&step)),
            other => panic!("expected abort, got {other:?}"),
        }
    }
}
