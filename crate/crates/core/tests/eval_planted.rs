mod common;

use continuum::eval::{correlations, latent_scatter, nn_regress, RegressionMode};
use continuum::model::encode;
use continuum::seeded_rng;
use continuum::synth::{generate, SyntheticSpec};

#[test]
fn planted_model_recovers_the_size_trend() {
    let spec = SyntheticSpec {
        per_level: 200,
        seed: 3,
        ..SyntheticSpec::default()
    };
    let ds = generate(&spec).unwrap();
    let (tx, ts) = ds.test_set();
    // radius(z) sweeps level 1..5 radii as z goes over ±2
    let params = common::planted_params(spec.side, 4, spec.radius(3), spec.radius_step);

    for mode in [RegressionMode::Pooled, RegressionMode::Averaged] {
        let rep = nn_regress(&params.decoder, tx.view(), ts.view(), 3, 200, mode, &mut seeded_rng(0, 0)).unwrap();
        assert!(rep.fit.r > 0.9, "{mode:?}: r = {}", rep.fit.r);
        assert!(rep.fit.slope > 0.0);
    }

    let z = encode(&params.encoder, tx.view()).unwrap();
    let corr = correlations(z.z.view(), ts.view()).unwrap();
    assert!(corr[0].spearman > 0.8, "{}", corr[0].spearman);
    assert!(corr[1..].iter().all(|c| c.zero_variance));

    let scatter = latent_scatter(z.z.view(), ts.view()).unwrap();
    assert!(scatter.pc.degenerate);
    assert_eq!(scatter.z_dep.len(), ts.len());
}
