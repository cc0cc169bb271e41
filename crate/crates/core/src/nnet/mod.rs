//! Temporal convolutional keyword classifier with optional reference-signal
//! fusion, hand-written backward pass, cost accounting and checkpoints.

mod checkpoint;
mod cost;
pub(crate) mod layers;
mod model;
mod params;
mod specaug;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use cost::{count_cost, encoder_fov, receptive_field, CostReport, FovConvention};
pub use model::{max_pool_logits, Batch, ForwardCache, ForwardOutput, LatentSequence, TcnModel};
pub use params::ParamStore;
pub use specaug::{spec_augment, SpecAugmentPolicy};

#[derive(Debug, Error)]
pub enum NnetError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("fusion mode {0:?} needs a reference signal in playback mode")]
    MissingReference(Fusion),
    #[error("input has {got} frames, at least {min} are required")]
    TooShort { got: usize, min: usize },
    #[error("feature width {got}, model expects {expected}")]
    FeatureWidth { got: usize, expected: usize },
    #[error("batch shape mismatch: {0}")]
    Shape(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Where and how the reference branch joins the mixture branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    Baseline,
    ConcatInput,
    ConcatD1,
    ConcatD2,
    ConcatD3,
    MaskD2,
}

impl Fusion {
    pub const ALL: [Fusion; 6] = [
        Fusion::Baseline,
        Fusion::ConcatInput,
        Fusion::ConcatD1,
        Fusion::ConcatD2,
        Fusion::ConcatD3,
        Fusion::MaskD2,
    ];

    pub fn uses_reference(self) -> bool {
        self != Fusion::Baseline
    }

    /// Number of residual blocks in the shared encoder for latent fusion.
    pub fn encoder_blocks(self) -> Option<usize> {
        match self {
            Fusion::ConcatD1 => Some(1),
            Fusion::ConcatD2 | Fusion::MaskD2 => Some(2),
            Fusion::ConcatD3 => Some(3),
            Fusion::Baseline | Fusion::ConcatInput => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Fusion::Baseline => "baseline",
            Fusion::ConcatInput => "concat_input",
            Fusion::ConcatD1 => "concat_d1",
            Fusion::ConcatD2 => "concat_d2",
            Fusion::ConcatD3 => "concat_d3",
            Fusion::MaskD2 => "mask_d2",
        }
    }
}

impl std::str::FromStr for Fusion {
    type Err = NnetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Fusion::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| NnetError::Config(format!("unknown fusion mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TcnConfig {
    pub in_features: usize,
    pub bottleneck_d: usize,
    pub hidden_h: usize,
    pub init_kernel: usize,
    pub init_stride: usize,
    pub blocks_per_repeat: usize,
    pub repeats: usize,
    pub dilations: Vec<usize>,
    pub dw_kernel: usize,
    pub n_classes: usize,
    pub fusion: Fusion,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl Default for TcnConfig {
    fn default() -> Self {
        Self {
            in_features: 64,
            bottleneck_d: 64,
            hidden_h: 128,
            init_kernel: 5,
            init_stride: 2,
            blocks_per_repeat: 3,
            repeats: 2,
            dilations: vec![1, 2, 4],
            dw_kernel: 5,
            n_classes: 35,
            fusion: Fusion::Baseline,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
        }
    }
}

impl TcnConfig {
    pub fn with_fusion(mut self, fusion: Fusion) -> Self {
        self.fusion = fusion;
        self
    }

    pub fn with_classes(mut self, n_classes: usize) -> Self {
        self.n_classes = n_classes;
        self
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks_per_repeat * self.repeats
    }

    /// Dilation of block `i` (0-based).
    pub fn dilation(&self, i: usize) -> usize {
        self.dilations[i % self.blocks_per_repeat]
    }

    pub fn validate(&self) -> Result<(), NnetError> {
        let bad = |m: &str| Err(NnetError::Config(m.to_string()));
        if self.in_features == 0 || self.bottleneck_d == 0 || self.hidden_h == 0 {
            return bad("channel widths must be positive");
        }
        if self.init_kernel == 0 || self.init_stride == 0 || self.dw_kernel == 0 {
            return bad("kernels and stride must be positive");
        }
        if self.dilations.len() != self.blocks_per_repeat || self.dilations.contains(&0) {
            return bad("need one positive dilation per block in a repeat");
        }
        if self.n_classes == 0 {
            return bad("n_classes must be positive");
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum <= 1.0) || !(self.bn_eps > 0.0) {
            return bad("batch-norm momentum must be in (0, 1] and eps positive");
        }
        if let Some(k) = self.fusion.encoder_blocks() {
            if k > self.n_blocks() {
                return bad("fusion point lies beyond the last block");
            }
        }
        Ok(())
    }
}
