use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown preset {0:?} (expected lidc, k562 or synthetic)")]
    UnknownPreset(String),

    #[error("invalid training config: {0}")]
    Invalid(String),
}

/// How the RBF bandwidths of the HSIC terms are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthPolicy {
    /// Median heuristic recomputed on every batch, once for the latent block
    /// and once for S.
    PerBatchMedian,
    /// One fixed σ² for every HSIC kernel.
    Frozen(f64),
}

impl BandwidthPolicy {
    pub fn label(&self) -> String {
        match self {
            BandwidthPolicy::PerBatchMedian => "median".to_string(),
            BandwidthPolicy::Frozen(s) => format!("frozen:{}", crate::table::fmt_real(*s)),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        if s == "median" {
            return Some(BandwidthPolicy::PerBatchMedian);
        }
        let v: f64 = s.strip_prefix("frozen:")?.parse().ok()?;
        (v > 0.0 && v.is_finite()).then_some(BandwidthPolicy::Frozen(v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub preset: String,
    pub d_z: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub batch_size: usize,
    pub steps: usize,
    /// λ1: weight of the prior-matching MMD².
    pub lambda_mmd: f64,
    /// λ2: weight of HSIC(Z_ind, S), minimized.
    pub lambda_ind: f64,
    /// λ3: weight of HSIC(Z_dep, S), maximized.
    pub lambda_dep: f64,
    pub learning_rate: f64,
    pub seed: u64,
    pub bandwidth: BandwidthPolicy,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig::preset("synthetic").expect("built-in preset")
    }
}

impl TrainingConfig {
    pub const PRESETS: [&'static str; 3] = ["lidc", "k562", "synthetic"];

    /// Built-in weight presets. `lidc` and `k562` carry the published
    /// weights verbatim; `synthetic` is tuned for the MLP on blob data.
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let (lambda_mmd, lambda_ind, lambda_dep) = match name {
            "lidc" => (1.0, 0.002, 0.05),
            "k562" => (10.0, 0.2, 0.01),
            "synthetic" => (300.0, 3000.0, 10.0),
            other => return Err(ConfigError::UnknownPreset(other.to_string())),
        };
        Ok(TrainingConfig {
            preset: name.to_string(),
            d_z: 8,
            encoder_hidden: vec![128, 64],
            decoder_hidden: vec![64, 128],
            batch_size: 128,
            steps: 3000,
            lambda_mmd,
            lambda_ind,
            lambda_dep,
            learning_rate: 1e-3,
            seed: 0,
            bandwidth: BandwidthPolicy::PerBatchMedian,
        })
    }

    pub fn disentangling(&self) -> bool {
        self.lambda_ind > 0.0 || self.lambda_dep > 0.0
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        for (name, v) in [
            ("lambda_mmd", self.lambda_mmd),
            ("lambda_ind", self.lambda_ind),
            ("lambda_dep", self.lambda_dep),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.batch_size < 4 {
            return bad(format!("batch_size must be at least 4, got {}", self.batch_size));
        }
        if self.d_z == 0 || (self.disentangling() && self.d_z < 2) {
            return bad(format!(
                "d_z must be at least 2 when the HSIC terms are active (got {})",
                self.d_z
            ));
        }
        if self.encoder_hidden.contains(&0) || self.decoder_hidden.contains(&0) {
            return bad("hidden layer widths must be positive".to_string());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if let BandwidthPolicy::Frozen(s) = self.bandwidth {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("frozen bandwidth must be positive, got {s}"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_presets() {
        let lidc = TrainingConfig::preset("lidc").unwrap();
        assert_eq!((lidc.lambda_mmd, lidc.lambda_ind, lidc.lambda_dep), (1.0, 0.002, 0.05));
        let k562 = TrainingConfig::preset("k562").unwrap();
        assert_eq!((k562.lambda_mmd, k562.lambda_ind, k562.lambda_dep), (10.0, 0.2, 0.01));
        assert_eq!(k562.learning_rate, 1e-3);
        assert!(TrainingConfig::preset("mnist").is_err());
    }

    #[test]
    fn validation() {
        let ok = TrainingConfig::default();
        ok.validate().unwrap();
        let mut c = ok.clone();
        c.batch_size = 3;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.lambda_ind = -1.0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.d_z = 1;
        assert!(c.validate().is_err());
        c.lambda_ind = 0.0;
        c.lambda_dep = 0.0;
        c.validate().unwrap();
        let mut c = ok;
        c.bandwidth = BandwidthPolicy::Frozen(0.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn bandwidth_labels_parse_back() {
        for p in [BandwidthPolicy::PerBatchMedian, BandwidthPolicy::Frozen(0.3)] {
            assert_eq!(BandwidthPolicy::parse(&p.label()), Some(p));
        }
        assert_eq!(BandwidthPolicy::parse("frozen:-1"), None);
    }
}
