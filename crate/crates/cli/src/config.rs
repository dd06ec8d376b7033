//! JSON run configuration.
//!
//! Every key is optional; unknown keys are rejected. Defaults:
//!
//! ```json
//! {
//!   "seed": null,
//!   "out_dir": "run",
//!   "data_dir": null,
//!   "data": {
//!     "side": 16, "levels": 5, "per_level": 1000,
//!     "radius_base": 2.0, "radius_step": 0.8,
//!     "rotation_min": 0.0, "rotation_max": 3.141592653589793,
//!     "eccentricity_min": 0.5, "eccentricity_max": 1.0,
//!     "jitter": 1.0, "noise_sigma": 0.02, "test_fraction": 0.2
//!   },
//!   "train": {
//!     "preset": "synthetic",
//!     "d_z": 8, "encoder_hidden": [128, 64], "decoder_hidden": [64, 128],
//!     "batch_size": 128, "steps": 3000, "learning_rate": 0.001,
//!     "lambda_mmd": <preset>, "lambda_ind": <preset>, "lambda_dep": <preset>,
//!     "bandwidth": "median"
//!   },
//!   "eval": {
//!     "k": 3, "n_gen": 200, "regression_mode": "pooled",
//!     "permutations": 200, "kde_points": 256, "svg": true
//!   }
//! }
//! ```
//!
//! `data_dir` defaults to `<out_dir>/data`. `bandwidth` is `"median"` or
//! `"frozen:<sigma_sq>"`. `seed` (or `--seed`) is required for `train`.

use std::path::{Path, PathBuf};

use continuum::eval::RegressionMode;
use continuum::model::{BandwidthPolicy, TrainingConfig};
use continuum::stats::MIN_PERMUTATIONS;
use continuum::synth::SyntheticSpec;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub data: DataSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub side: usize,
    pub levels: usize,
    pub per_level: usize,
    pub radius_base: f64,
    pub radius_step: f64,
    pub rotation_min: f64,
    pub rotation_max: f64,
    pub eccentricity_min: f64,
    pub eccentricity_max: f64,
    pub jitter: f64,
    pub noise_sigma: f64,
    pub test_fraction: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        let s = SyntheticSpec::default();
        DataSection {
            side: s.side,
            levels: s.levels,
            per_level: s.per_level,
            radius_base: s.radius_base,
            radius_step: s.radius_step,
            rotation_min: s.rotation_range.0,
            rotation_max: s.rotation_range.1,
            eccentricity_min: s.eccentricity_range.0,
            eccentricity_max: s.eccentricity_range.1,
            jitter: s.jitter,
            noise_sigma: s.noise_sigma,
            test_fraction: s.test_fraction,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub preset: String,
    pub d_z: Option<usize>,
    pub encoder_hidden: Option<Vec<usize>>,
    pub decoder_hidden: Option<Vec<usize>>,
    pub batch_size: Option<usize>,
    pub steps: Option<usize>,
    pub lambda_mmd: Option<f64>,
    pub lambda_ind: Option<f64>,
    pub lambda_dep: Option<f64>,
    pub learning_rate: Option<f64>,
    pub bandwidth: Option<String>,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            preset: "synthetic".to_string(),
            d_z: None,
            encoder_hidden: None,
            decoder_hidden: None,
            batch_size: None,
            steps: None,
            lambda_mmd: None,
            lambda_ind: None,
            lambda_dep: None,
            learning_rate: None,
            bandwidth: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub k: usize,
    pub n_gen: usize,
    pub regression_mode: String,
    pub permutations: usize,
    pub kde_points: usize,
    pub svg: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            k: 3,
            n_gen: 200,
            regression_mode: "pooled".to_string(),
            permutations: 200,
            kde_points: 256,
            svg: true,
        }
    }
}

/// Resolved evaluation options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub k: usize,
    pub n_gen: usize,
    pub mode: RegressionMode,
    pub permutations: usize,
    pub kde_points: usize,
    pub svg: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        RunConfig::default().eval_options().expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("run"))
    }

    pub fn data_dir(&self, out_dir: &Path) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(|| out_dir.join("data"))
    }

    pub fn synthetic_spec(&self) -> Result<SyntheticSpec, CliError> {
        let d = &self.data;
        let spec = SyntheticSpec {
            side: d.side,
            levels: d.levels,
            per_level: d.per_level,
            radius_base: d.radius_base,
            radius_step: d.radius_step,
            rotation_range: (d.rotation_min, d.rotation_max),
            eccentricity_range: (d.eccentricity_min, d.eccentricity_max),
            jitter: d.jitter,
            noise_sigma: d.noise_sigma,
            test_fraction: d.test_fraction,
            seed: self.seed.unwrap_or(0),
        };
        spec.validate().map_err(|e| CliError::config(format!("invalid keys in \"data\": {e}")))?;
        Ok(spec)
    }

    /// Training config: preset values overridden by explicit keys. Fails
    /// when no seed was given.
    pub fn training_config(&self) -> Result<TrainingConfig, CliError> {
        let Some(seed) = self.seed else {
            return Err(CliError::config("train requires a seed: pass --seed N or set \"seed\" in the config"));
        };
        self.training_config_with_seed(seed)
    }

    pub fn training_config_with_seed(&self, seed: u64) -> Result<TrainingConfig, CliError> {
        let t = &self.train;
        let mut c = TrainingConfig::preset(&t.preset).map_err(|e| CliError::config(format!("train.preset: {e}")))?;
        c.seed = seed;
        if let Some(v) = t.d_z {
            c.d_z = v;
        }
        if let Some(v) = &t.encoder_hidden {
            c.encoder_hidden = v.clone();
        }
        if let Some(v) = &t.decoder_hidden {
            c.decoder_hidden = v.clone();
        }
        if let Some(v) = t.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = t.steps {
            c.steps = v;
        }
        if let Some(v) = t.lambda_mmd {
            c.lambda_mmd = v;
        }
        if let Some(v) = t.lambda_ind {
            c.lambda_ind = v;
        }
        if let Some(v) = t.lambda_dep {
            c.lambda_dep = v;
        }
        if let Some(v) = t.learning_rate {
            c.learning_rate = v;
        }
        if let Some(b) = &t.bandwidth {
            c.bandwidth = BandwidthPolicy::parse(b).ok_or_else(|| {
                CliError::config(format!("train.bandwidth: expected \"median\" or \"frozen:<sigma_sq>\", got {b:?}"))
            })?;
        }
        c.validate().map_err(|e| CliError::config(format!("invalid keys in \"train\": {e}")))?;
        Ok(c)
    }

    pub fn eval_options(&self) -> Result<EvalOptions, CliError> {
        let e = &self.eval;
        let mut bad = Vec::new();
        if e.k == 0 {
            bad.push("eval.k must be at least 1".to_string());
        }
        if e.n_gen < continuum::eval::MIN_GENERATED {
            bad.push(format!("eval.n_gen must be at least {}", continuum::eval::MIN_GENERATED));
        }
        if e.permutations != 0 && e.permutations < MIN_PERMUTATIONS {
            bad.push(format!("eval.permutations must be 0 or at least {MIN_PERMUTATIONS}"));
        }
        if e.kde_points < 2 {
            bad.push("eval.kde_points must be at least 2".to_string());
        }
        let mode = RegressionMode::from_name(&e.regression_mode);
        if mode.is_none() {
            bad.push(format!(
                "eval.regression_mode must be \"pooled\" or \"averaged\", got {:?}",
                e.regression_mode
            ));
        }
        if !bad.is_empty() {
            return Err(CliError::config(format!("invalid keys: {}", bad.join("; "))));
        }
        Ok(EvalOptions {
            k: e.k,
            n_gen: e.n_gen,
            mode: mode.expect("checked"),
            permutations: e.permutations,
            kde_points: e.kde_points,
            svg: e.svg,
        })
    }
}
