use continuum::model::{train, TrainingConfig};
use continuum::synth::{generate, SyntheticSpec};

fn window_mean(v: &[f64], first: bool) -> f64 {
    let w = (v.len() / 10).max(1);
    let slice = if first { &v[..w] } else { &v[v.len() - w..] };
    slice.iter().sum::<f64>() / w as f64
}

#[test]
fn plain_autoencoder_reduces_reconstruction() {
    let ds = generate(&SyntheticSpec {
        per_level: 100,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let (x, s) = ds.train_set();
    let config = TrainingConfig {
        lambda_mmd: 0.0,
        lambda_ind: 0.0,
        lambda_dep: 0.0,
        encoder_hidden: vec![32],
        decoder_hidden: vec![32],
        batch_size: 32,
        steps: 300,
        seed: 1,
        ..TrainingConfig::default()
    };
    let out = train(&config, &x, &s).unwrap();
    let recon: Vec<f64> = out.trace.iter().map(|l| l.recon).collect();
    assert!(window_mean(&recon, false) < window_mean(&recon, true));
    for l in &out.trace {
        assert_eq!(l.total, l.recon);
    }
}

#[test]
fn regularized_trace_keeps_composition_identity() {
    let ds = generate(&SyntheticSpec {
        per_level: 40,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let (x, s) = ds.train_set();
    let config = TrainingConfig {
        encoder_hidden: vec![16],
        decoder_hidden: vec![16],
        batch_size: 16,
        steps: 40,
        seed: 2,
        ..TrainingConfig::default()
    };
    let out = train(&config, &x, &s).unwrap();
    assert_eq!(out.trace.len(), 40);
    for l in &out.trace {
        assert_eq!(l.total, l.recompose());
        assert!(l.hsic_ind >= 0.0 && l.hsic_dep >= 0.0);
    }
}
