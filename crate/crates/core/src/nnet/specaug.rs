use ndarray::{s, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::FeatureSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpecAugmentPolicy {
    pub freq_masks: usize,
    pub max_freq_width: usize,
    pub time_masks: usize,
    pub max_time_width: usize,
}

impl Default for SpecAugmentPolicy {
    fn default() -> Self {
        Self {
            freq_masks: 2,
            max_freq_width: 8,
            time_masks: 2,
            max_time_width: 16,
        }
    }
}

impl SpecAugmentPolicy {
    pub fn off() -> Self {
        Self {
            freq_masks: 0,
            max_freq_width: 0,
            time_masks: 0,
            max_time_width: 0,
        }
    }

    /// A `frames x features` matrix of ones with the drawn bands zeroed.
    /// Draw order: all frequency masks (width, start), then time masks.
    pub fn draw_mask<R: Rng + ?Sized>(&self, frames: usize, features: usize, rng: &mut R) -> Array2<f64> {
        let mut m = Array2::ones((frames, features));
        for _ in 0..self.freq_masks {
            let w = rng.random_range(0..=self.max_freq_width.min(features));
            let start = rng.random_range(0..=features - w);
            m.slice_mut(s![.., start..start + w]).fill(0.0);
        }
        for _ in 0..self.time_masks {
            let w = rng.random_range(0..=self.max_time_width.min(frames));
            let start = rng.random_range(0..=frames - w);
            m.slice_mut(s![start..start + w, ..]).fill(0.0);
        }
        m
    }
}

/// Zeroes random frequency and time bands of (batch-normalised) features.
pub fn spec_augment<R: Rng + ?Sized>(
    features: &FeatureSequence,
    rng: &mut R,
    policy: &SpecAugmentPolicy,
) -> FeatureSequence {
    let mask = policy.draw_mask(features.n_frames(), features.n_features(), rng);
    FeatureSequence::new(features.values() * &mask)
}
