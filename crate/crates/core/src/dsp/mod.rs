//! Deterministic signal primitives: STFT/iSTFT, Mel filterbank, LFBE
//! features, FIR convolution and WAV I/O.

mod fir;
mod mel;
mod stft;
mod wav;

use thiserror::Error;

pub use fir::{fir_convolve, fir_convolve_direct, fir_convolve_fft, fir_convolve_full};
pub use mel::{
    hz_to_mel, lfbe, mel_to_hz, FeatureSequence, Lfbe, MelFilterbank, ENERGY_FLOOR, LFBE_HOP, LFBE_WINDOW, N_MELS,
};
pub use stft::{istft, stft, window, Spectrogram, Stft, WindowKind};
pub(crate) use wav::write_wav_i16;
pub use wav::{dequantize_i16, quantize_i16, read_wav, write_wav};

/// The only supported sample rate.
pub const SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("input has {len} samples, shorter than one {window_len}-sample window")]
    ShortInput { len: usize, window_len: usize },
    #[error("invalid framing: window {window_len}, hop {hop} (window must be even, 0 < hop <= window)")]
    InvalidFraming { window_len: usize, hop: usize },
    #[error("{kind:?} window of {window_len} samples with hop {hop} violates constant overlap-add")]
    NotCola {
        kind: WindowKind,
        window_len: usize,
        hop: usize,
    },
    #[error("spectrogram has {got} bins, expected {expected}")]
    BinMismatch { got: usize, expected: usize },
    #[error("sample rate {0} Hz is unsupported, only 16000 Hz is accepted")]
    SampleRate(u32),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("unsupported WAV format in {path}: {reason}")]
    WavFormat { path: String, reason: String },
    #[error("wav i/o: {0}")]
    Wav(#[from] hound::Error),
}

/// Mono audio at 16 kHz with finite samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>) -> Result<Self, DspError> {
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(DspError::NonFinite(i));
        }
        Ok(Self { samples })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            samples: vec![0.0; len],
        }
    }

    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / SAMPLE_RATE as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.energy() / self.samples.len() as f64
        }
    }

    /// Zero-pads or truncates at the tail to exactly `len` samples.
    pub fn fit_to(&self, len: usize) -> Self {
        let mut samples = self.samples.clone();
        samples.resize(len, 0.0);
        Self { samples }
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
        }
    }
}
