//! Optimisation loop for the TCN classifiers: cross-entropy on max-pooled
//! logits, AdamW, per-example playback sampling and early stopping.

mod adam;
mod data;
mod fit;
mod loss;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::DspError;
use crate::eval::EvalError;
use crate::mixer::{AugmentConfig, MixError};
use crate::nnet::{receptive_field, NnetError, SpecAugmentPolicy, TcnConfig};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use data::{choose_source, collate, DataSources, Example, Pcm, PlaybackPair, PlaybackSource, TrainClip, TrainData};
pub use fit::{fit, fit_model, EpochRecord, FitReport, LOG_HEADER};
pub use loss::{batch_cross_entropy, cross_entropy};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("no training data: {0} is empty")]
    EmptyData(&'static str),
    #[error("non-finite loss {loss} at epoch {epoch}, step {step}")]
    NonFinite { epoch: usize, step: usize, loss: f64 },
    #[error(transparent)]
    Nnet(#[from] NnetError),
    #[error(transparent)]
    Mix(#[from] MixError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("training log: {0}")]
    Log(#[from] std::io::Error),
}

/// How playback examples are produced during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Clean clips only.
    Off,
    /// Mixtures of two training clips built on the fly.
    Augm,
    /// Pre-synthesised playback mixtures with their oracle reference.
    Orcl,
    /// `Augm` or `Orcl` with equal probability per example.
    Both,
}

/// Model-selection metric on the dev set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DevMetric {
    Accuracy,
    /// False-reject rate at a target false-accept rate, for single-logit
    /// detectors.
    FrrAtFar(f64),
}

impl DevMetric {
    pub fn better(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            DevMetric::Accuracy => candidate > incumbent,
            DevMetric::FrrAtFar(_) => candidate < incumbent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub batch_size: usize,
    pub segment_frames: usize,
    pub augmentation: Strategy,
    /// Probability that a training example is a playback example.
    pub playback_prob: f64,
    pub augment: AugmentConfig,
    pub spec_augment: SpecAugmentPolicy,
    pub dev_metric: DevMetric,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 1e-4,
            max_epochs: 200,
            early_stop_patience: 10,
            batch_size: 256,
            segment_frames: 117,
            augmentation: Strategy::Both,
            playback_prob: 0.5,
            augment: AugmentConfig::default(),
            spec_augment: SpecAugmentPolicy::default(),
            dev_metric: DevMetric::Accuracy,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }

    pub fn validate(&self, model: &TcnConfig) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.early_stop_patience >= self.max_epochs {
            return bad(format!(
                "early_stop_patience {} must be below max_epochs {}",
                self.early_stop_patience, self.max_epochs
            ));
        }
        let rf = receptive_field(model);
        if self.segment_frames != rf {
            return bad(format!(
                "segment_frames {} differs from the receptive field {rf}",
                self.segment_frames
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.lr > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("lr must be positive and weight_decay non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.playback_prob) {
            return bad(format!("playback_prob {} is not a probability", self.playback_prob));
        }
        if let DevMetric::FrrAtFar(t) = self.dev_metric {
            if !(t > 0.0 && t < 1.0) {
                return bad(format!("dev target FAR {t} outside (0, 1)"));
            }
            if model.n_classes != 1 {
                return bad("FRR selection needs a single-logit model".into());
            }
        }
        Ok(())
    }
}
