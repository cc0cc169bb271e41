use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{AudioBuffer, DspError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    SqrtHann,
    Hann,
}

/// Periodic window of length `len`.
pub fn window(kind: WindowKind, len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| {
            let hann = 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos();
            match kind {
                WindowKind::Hann => hann,
                WindowKind::SqrtHann => hann.sqrt(),
            }
        })
        .collect()
}

/// Complex one-sided STFT frames, `T x (window_len / 2 + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    frames: Array2<Complex64>,
    window_len: usize,
    hop: usize,
    window_kind: WindowKind,
}

impl Spectrogram {
    pub fn new(
        frames: Array2<Complex64>,
        window_len: usize,
        hop: usize,
        window_kind: WindowKind,
    ) -> Result<Self, DspError> {
        check_framing(window_len, hop)?;
        let expected = window_len / 2 + 1;
        if frames.ncols() != expected {
            return Err(DspError::BinMismatch {
                got: frames.ncols(),
                expected,
            });
        }
        Ok(Self {
            frames,
            window_len,
            hop,
            window_kind,
        })
    }

    pub fn zeros(n_frames: usize, window_len: usize, hop: usize, window_kind: WindowKind) -> Self {
        Self {
            frames: Array2::zeros((n_frames, window_len / 2 + 1)),
            window_len,
            hop,
            window_kind,
        }
    }

    pub fn frames(&self) -> &Array2<Complex64> {
        &self.frames
    }

    pub fn frames_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.frames
    }

    pub fn into_frames(self) -> Array2<Complex64> {
        self.frames
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.frames.ncols()
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window_kind(&self) -> WindowKind {
        self.window_kind
    }

    /// Same framing as `self`, different frame data.
    pub fn with_frames(&self, frames: Array2<Complex64>) -> Result<Self, DspError> {
        Self::new(frames, self.window_len, self.hop, self.window_kind)
    }

    pub fn same_framing(&self, other: &Spectrogram) -> bool {
        self.window_len == other.window_len && self.hop == other.hop && self.window_kind == other.window_kind
    }

    /// Sum of `|X|^2` over frames `[0, n_frames)`.
    pub fn power_over(&self, n_frames: usize) -> f64 {
        self.frames
            .rows()
            .into_iter()
            .take(n_frames)
            .map(|row| row.iter().map(|c| c.norm_sqr()).sum::<f64>())
            .sum()
    }
}

fn check_framing(window_len: usize, hop: usize) -> Result<(), DspError> {
    if window_len == 0 || window_len % 2 != 0 || hop == 0 || hop > window_len {
        return Err(DspError::InvalidFraming { window_len, hop });
    }
    Ok(())
}

/// Planned analysis/synthesis pair for one framing. Frames start at sample 0
/// with no centre padding.
#[derive(Clone)]
pub struct Stft {
    window_len: usize,
    hop: usize,
    kind: WindowKind,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft")
            .field("window_len", &self.window_len)
            .field("hop", &self.hop)
            .field("kind", &self.kind)
            .finish()
    }
}

impl Stft {
    pub fn new(window_len: usize, hop: usize, kind: WindowKind) -> Result<Self, DspError> {
        check_framing(window_len, hop)?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            window_len,
            hop,
            kind,
            window: window(kind, window_len),
            forward: planner.plan_fft_forward(window_len),
            inverse: planner.plan_fft_inverse(window_len),
        })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn n_bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.hop + 1
        }
    }

    pub fn forward(&self, audio: &AudioBuffer) -> Result<Spectrogram, DspError> {
        self.forward_samples(audio.samples())
    }

    pub fn forward_samples(&self, x: &[f64]) -> Result<Spectrogram, DspError> {
        if x.len() < self.window_len {
            return Err(DspError::ShortInput {
                len: x.len(),
                window_len: self.window_len,
            });
        }
        let n_frames = self.n_frames(x.len());
        let n_bins = self.n_bins();
        let mut frames = Array2::zeros((n_frames, n_bins));
        let mut buf = vec![Complex64::new(0.0, 0.0); self.window_len];
        for t in 0..n_frames {
            let start = t * self.hop;
            for (n, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(x[start + n] * self.window[n], 0.0);
            }
            self.forward.process(&mut buf);
            for (k, c) in frames.row_mut(t).iter_mut().enumerate() {
                *c = buf[k];
            }
        }
        Ok(Spectrogram {
            frames,
            window_len: self.window_len,
            hop: self.hop,
            window_kind: self.kind,
        })
    }

    /// Constant value of `sum_m w^2[n + m*hop]`, or an error if the window
    /// does not overlap-add to a constant at this hop.
    pub fn cola_gain(&self) -> Result<f64, DspError> {
        let sums: Vec<f64> = (0..self.hop)
            .map(|n| {
                (n..self.window_len)
                    .step_by(self.hop)
                    .map(|i| self.window[i] * self.window[i])
                    .sum()
            })
            .collect();
        let reference = sums[0];
        let ok = reference > 0.0 && sums.iter().all(|s| (s - reference).abs() <= 1e-9 * reference.abs());
        if ok {
            Ok(reference)
        } else {
            Err(DspError::NotCola {
                kind: self.kind,
                window_len: self.window_len,
                hop: self.hop,
            })
        }
    }

    /// Weighted overlap-add with the analysis window as synthesis window.
    /// Output length is `(T - 1) * hop + window_len`; samples in the first and
    /// last `window_len - hop` positions are not fully overlapped.
    pub fn inverse(&self, spec: &Spectrogram) -> Result<AudioBuffer, DspError> {
        if spec.window_len != self.window_len || spec.hop != self.hop || spec.window_kind != self.kind {
            return Err(DspError::InvalidFraming {
                window_len: spec.window_len,
                hop: spec.hop,
            });
        }
        let gain = self.cola_gain()?;
        let n_frames = spec.n_frames();
        if n_frames == 0 {
            return AudioBuffer::new(Vec::new());
        }
        let n = self.window_len;
        let out_len = (n_frames - 1) * self.hop + n;
        let mut out = vec![0.0; out_len];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let scale = 1.0 / (n as f64 * gain);
        for t in 0..n_frames {
            let row = spec.frames.row(t);
            for k in 0..=n / 2 {
                buf[k] = row[k];
            }
            for k in 1..n / 2 {
                buf[n - k] = row[k].conj();
            }
            // The imaginary parts of DC and Nyquist cannot survive a real
            // signal; drop them so the inverse is exactly real.
            buf[0].im = 0.0;
            buf[n / 2].im = 0.0;
            self.inverse.process(&mut buf);
            let start = t * self.hop;
            for i in 0..n {
                out[start + i] += buf[i].re * self.window[i] * scale;
            }
        }
        AudioBuffer::new(out)
    }
}

pub fn stft(
    audio: &AudioBuffer,
    window_len: usize,
    hop: usize,
    window_kind: WindowKind,
) -> Result<Spectrogram, DspError> {
    Stft::new(window_len, hop, window_kind)?.forward(audio)
}

pub fn istft(spec: &Spectrogram) -> Result<AudioBuffer, DspError> {
    Stft::new(spec.window_len, spec.hop, spec.window_kind)?.inverse(spec)
}
