//! Training loops for every compared method and the multi-seed protocol.

mod suite;
mod train;

pub use suite::{aggregate, format_table, mean_std, run_suite, RunFailure, SuiteResult, SuiteRow};
pub use train::{
    pretrain, run, run_baseline_aekm, run_baseline_km, run_dcn, run_dkm, run_observed, run_ours,
    run_ours_norein, run_with_pretrained, Pretrained,
};

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::clustering::{Centroids, KMeansSettings};
use crate::error::{Error, Result};
use crate::losses::{LossConfig, Variant, DEFAULT_EPSILON};
use crate::metrics::MetricsReport;
use crate::nn::OptimizerSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// K-means on raw features.
    Km,
    /// Pretrained autoencoder, then K-means on latents.
    Aekm,
    Dcn,
    Dkm,
    /// DKM with K-means centroid reinitialization after every epoch.
    DkmRein,
    /// Centering loss with per-epoch K-means reinitialization.
    Ours,
    /// Centering loss with centroids frozen at their initial K-means values.
    OursNorein,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Km,
        Method::Aekm,
        Method::Dcn,
        Method::Dkm,
        Method::DkmRein,
        Method::Ours,
        Method::OursNorein,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Km => "km",
            Method::Aekm => "aekm",
            Method::Dcn => "dcn",
            Method::Dkm => "dkm",
            Method::DkmRein => "dkm_rein",
            Method::Ours => "ours",
            Method::OursNorein => "ours_norein",
        }
    }

    /// Clustering-loss coefficient used when none is configured
    /// (MNIST column of the reference hyperparameter table).
    pub fn default_lambda(self) -> f64 {
        match self {
            Method::Ours | Method::OursNorein | Method::Dcn => 10.0,
            Method::Dkm | Method::DkmRein => 1.0,
            Method::Km | Method::Aekm => 0.0,
        }
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            Method::Ours | Method::OursNorein => Some(Variant::Ct),
            Method::Dkm | Method::DkmRein => Some(Variant::Dkm),
            Method::Dcn => Some(Variant::Dcn),
            Method::Km | Method::Aekm => None,
        }
    }

    pub fn uses_autoencoder(self) -> bool {
        self != Method::Km
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', '+'], "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .or(match norm.as_str() {
                "dkm_plus_rein" | "dkmrein" => Some(Method::DkmRein),
                "ours_minus_rein" | "oursnorein" => Some(Method::OursNorein),
                _ => None,
            })
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::Config(format!("unknown method {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// Everything a single run needs. Unset `lambda` falls back to
/// [`Method::default_lambda`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    pub seed: u64,
    pub k: usize,
    pub latent_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub batch_size: usize,
    pub lambda: Option<f64>,
    pub alpha: f64,
    pub epsilon: f64,
    pub pretrain_optimizer: OptimizerSettings,
    pub finetune_optimizer: OptimizerSettings,
    pub kmeans: KMeansSettings,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Ours,
            seed: 0,
            k: 10,
            latent_dim: 10,
            hidden_dims: vec![500, 500, 2000],
            pretrain_epochs: 50,
            finetune_epochs: 100,
            batch_size: 256,
            lambda: None,
            alpha: 3.0,
            epsilon: DEFAULT_EPSILON,
            pretrain_optimizer: OptimizerSettings::default(),
            finetune_optimizer: OptimizerSettings::default(),
            kmeans: KMeansSettings::default(),
        }
    }
}

impl TrainConfig {
    pub fn lambda(&self) -> f64 {
        self.lambda.unwrap_or_else(|| self.method.default_lambda())
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Encoder widths `[m, hidden.., l]` for input dimension `m`.
    pub fn encoder_dims(&self, input_dim: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(input_dim);
        dims.extend(&self.hidden_dims);
        dims.push(self.latent_dim);
        dims
    }

    pub fn loss_config(&self) -> Option<LossConfig> {
        self.method.variant().map(|variant| LossConfig {
            lambda: self.lambda(),
            alpha: self.alpha,
            epsilon: self.epsilon,
            variant,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k", self.k),
            ("latent_dim", self.latent_dim),
            ("batch_size", self.batch_size),
            ("kmeans.max_iters", self.kmeans.max_iters),
            ("kmeans.n_init", self.kmeans.n_init),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        if !(self.kmeans.tol >= 0.0) {
            return Err(Error::Config("kmeans.tol must be ≥ 0".into()));
        }
        for (name, opt) in [("pretrain", self.pretrain_optimizer), ("finetune", self.finetune_optimizer)] {
            if !(opt.learning_rate > 0.0 && opt.learning_rate.is_finite()) {
                return Err(Error::Config(format!("{name} learning rate must be positive")));
            }
        }
        let lambda = self.lambda();
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be ≥ 0, got {lambda}")));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be > 0".into()));
        }
        Ok(())
    }
}

/// Outcome of one (method, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub seed: u64,
    pub dataset: String,
    /// Configuration used, with `lambda` resolved.
    pub config: TrainConfig,
    /// Mean reconstruction loss per pretraining epoch.
    pub pretrain_loss: Vec<f64>,
    /// Mean reconstruction loss per finetuning epoch.
    pub reconstruction_loss: Vec<f64>,
    /// Mean unscaled clustering loss per finetuning epoch.
    pub clustering_loss: Vec<f64>,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub metrics: Option<MetricsReport>,
    pub wall_clock_secs: f64,
    /// Final latent codes (raw features for KM); not serialized.
    #[serde(skip)]
    pub latents: Option<Array2<f64>>,
}

/// Hooks into the centroid trajectory of a run.
pub trait TrainObserver {
    /// Centroids after the initial K-means on pretrained latents.
    fn on_init(&mut self, _centroids: &Centroids) {}
    /// Called after every optimizer step of finetuning.
    fn on_batch(&mut self, _epoch: usize, _batch: usize, _centroids: &Centroids) {}
    /// Centroids going into the next epoch.
    fn on_epoch_end(&mut self, _epoch: usize, _centroids: &Centroids) {}
}

pub struct NoObserver;

impl TrainObserver for NoObserver {}

/// Independent sub-seeds for each random consumer of a run.
pub(crate) mod streams {
    pub const INIT: u64 = 1;
    pub const PRETRAIN_SHUFFLE: u64 = 2;
    pub const FINETUNE_SHUFFLE: u64 = 3;
    pub const KMEANS: u64 = 1 << 32;

    /// SplitMix64 finalizer over `seed` and `stream`.
    pub fn derive(seed: u64, stream: u64) -> u64 {
        let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("DKM+rein".parse::<Method>().unwrap(), Method::DkmRein);
        assert!("dec".parse::<Method>().is_err());
    }

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.pretrain_epochs, c.finetune_epochs, c.batch_size), (50, 100, 256));
        assert_eq!(c.alpha, 3.0);
        assert_eq!(c.lambda(), 10.0);
        assert_eq!(c.clone().with_method(Method::Dkm).lambda(), 1.0);
        assert_eq!(c.with_method(Method::Dcn).lambda(), 10.0);
    }

    #[test]
    fn validation() {
        let bad = TrainConfig {
            lambda: Some(-1.0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn streams_differ() {
        assert_ne!(streams::derive(1, streams::INIT), streams::derive(1, streams::PRETRAIN_SHUFFLE));
        assert_ne!(streams::derive(1, streams::INIT), streams::derive(2, streams::INIT));
    }
}
