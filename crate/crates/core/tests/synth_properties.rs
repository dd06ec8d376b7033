use continuum::eval::ols;
use continuum::synth::{bright_pixel_count, generate, SyntheticSpec};

#[test]
fn area_grows_with_level() {
    let spec = SyntheticSpec {
        per_level: 200,
        seed: 11,
        ..SyntheticSpec::default()
    };
    let ds = generate(&spec).unwrap();
    let mut mean_area = vec![0.0; spec.levels];
    for (row, &level) in ds.images.rows().into_iter().zip(&ds.levels) {
        mean_area[level as usize - 1] += bright_pixel_count(row, 0.5) as f64 / spec.per_level as f64;
    }
    assert!(mean_area.windows(2).all(|w| w[1] > w[0]), "{mean_area:?}");
}

#[test]
fn nuisance_factors_are_uncorrelated_with_level() {
    let spec = SyntheticSpec {
        per_level: 200,
        seed: 5,
        ..SyntheticSpec::default()
    };
    let ds = generate(&spec).unwrap();
    assert_eq!(ds.len(), 1000);
    let s: Vec<f64> = ds.levels.to_vec();
    let rot: Vec<f64> = ds.factors.iter().map(|f| f.rotation).collect();
    let ecc: Vec<f64> = ds.factors.iter().map(|f| f.eccentricity).collect();
    assert!(ols(&rot, &s).r.abs() < 0.05);
    // r has standard error ~1/√n ≈ 0.032 here; 4 standard errors
    assert!(ols(&ecc, &s).r.abs() < 4.0 / 1000f64.sqrt());
}

#[test]
fn split_is_disjoint_exhaustive_and_seeded() {
    let spec = SyntheticSpec {
        per_level: 40,
        ..SyntheticSpec::default()
    };
    let a = generate(&spec).unwrap();
    let b = generate(&spec).unwrap();
    assert_eq!(a.train, b.train);
    assert_eq!(a.images, b.images);
    let mut all: Vec<usize> = a.train.iter().chain(&a.test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..a.len()).collect::<Vec<_>>());
    assert_eq!(a.test.len(), 40);
    let c = generate(&SyntheticSpec { seed: 1, ..spec }).unwrap();
    assert_ne!(a.test, c.test);
}
