use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::AecError;
use crate::dsp::{AudioBuffer, Stft, WindowKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NlmsConfig {
    pub taps_per_bin: usize,
    pub step_mu: f64,
    pub window: usize,
    pub hop: usize,
    pub window_kind: WindowKind,
    pub eps: f64,
}

impl Default for NlmsConfig {
    fn default() -> Self {
        Self {
            taps_per_bin: 32,
            step_mu: 0.5,
            window: 512,
            hop: 128,
            window_kind: WindowKind::SqrtHann,
            eps: 1e-10,
        }
    }
}

impl NlmsConfig {
    pub fn validate(&self) -> Result<(), AecError> {
        if !(self.step_mu > 0.0 && self.step_mu <= 2.0) {
            return Err(AecError::Config(format!("step_mu {} outside (0, 2]", self.step_mu)));
        }
        if self.taps_per_bin == 0 {
            return Err(AecError::Config("taps_per_bin must be at least 1".into()));
        }
        if !(self.eps > 0.0) {
            return Err(AecError::Config("eps must be positive".into()));
        }
        Ok(())
    }
}

/// Per-bin complex NLMS over the last `taps_per_bin` reference frames.
/// Weights persist across calls to [`NlmsCanceller::process`].
#[derive(Debug, Clone)]
pub struct NlmsCanceller {
    cfg: NlmsConfig,
    stft: Stft,
    weights: Array2<Complex64>,
}

impl NlmsCanceller {
    pub fn new(cfg: NlmsConfig) -> Result<Self, AecError> {
        cfg.validate()?;
        let stft = Stft::new(cfg.window, cfg.hop, cfg.window_kind)?;
        let weights = Array2::zeros((stft.n_bins(), cfg.taps_per_bin));
        Ok(Self { cfg, stft, weights })
    }

    pub fn weights(&self) -> &Array2<Complex64> {
        &self.weights
    }

    /// Filters `mixture` against `reference` frame by frame. With `adapt`
    /// false the current weights are applied unchanged.
    pub fn process(
        &mut self,
        mixture: &AudioBuffer,
        reference: &AudioBuffer,
        adapt: bool,
    ) -> Result<AudioBuffer, AecError> {
        let len = mixture.len().max(reference.len());
        if len == 0 {
            return Ok(AudioBuffer::zeros(0));
        }
        let (n, hop) = (self.cfg.window, self.cfg.hop);
        // Front and back padding put every input sample under a full set of
        // overlapping frames.
        let front = n - hop;
        let body = front + len + front;
        let total = n + (body.saturating_sub(n)).div_ceil(hop) * hop;
        let pad = |x: &[f64]| {
            let mut v = vec![0.0; total];
            v[front..front + x.len()].copy_from_slice(x);
            v
        };
        let y = self.stft.forward_samples(&pad(mixture.samples()))?;
        let r = self.stft.forward_samples(&pad(reference.samples()))?;
        let (frames, bins) = (y.n_frames(), y.n_bins());
        let taps = self.cfg.taps_per_bin;
        let (mu, eps) = (self.cfg.step_mu, self.cfg.eps);
        let mut e = Array2::<Complex64>::zeros((frames, bins));
        let mut hist = vec![Complex64::new(0.0, 0.0); taps];
        for k in 0..bins {
            hist.iter_mut().for_each(|h| *h = Complex64::new(0.0, 0.0));
            let mut w = self.weights.row_mut(k);
            for t in 0..frames {
                hist.rotate_right(1);
                hist[0] = r.frames()[[t, k]];
                let est: Complex64 = w.iter().zip(&hist).map(|(w, x)| w.conj() * x).sum();
                let err = y.frames()[[t, k]] - est;
                e[[t, k]] = err;
                if adapt {
                    let norm: f64 = hist.iter().map(|x| x.norm_sqr()).sum();
                    let scale = mu / (norm + eps);
                    let ec = err.conj();
                    w.iter_mut().zip(&hist).for_each(|(w, x)| *w += x * ec * scale);
                }
            }
        }
        let out = self.stft.inverse(&y.with_frames(e)?)?;
        Ok(AudioBuffer::new(out.samples()[front..front + len].to_vec())?)
    }
}

/// Runs a fresh NLMS canceller over the whole utterance.
pub fn nlms_cancel(mixture: &AudioBuffer, reference: &AudioBuffer, cfg: &NlmsConfig) -> Result<AudioBuffer, AecError> {
    NlmsCanceller::new(*cfg)?.process(mixture, reference, true)
}
