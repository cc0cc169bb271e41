use ndarray::{Array2, Axis};

use super::{AudioBuffer, DspError, Spectrogram, Stft, WindowKind, SAMPLE_RATE};

pub const N_MELS: usize = 64;
/// 25 ms at 16 kHz.
pub const LFBE_WINDOW: usize = 400;
/// 10 ms at 16 kHz.
pub const LFBE_HOP: usize = 160;
/// Energy floor applied before the logarithm.
pub const ENERGY_FLOOR: f64 = 1e-7;

/// HTK mel scale.
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters with unit peak, centres equally spaced on the mel
/// scale between `fmin` and `fmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    weights: Array2<f64>,
    centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_mels: usize, n_fft: usize, sample_rate: u32, fmin: f64, fmax: f64) -> Self {
        let n_bins = n_fft / 2 + 1;
        let (mlo, mhi) = (hz_to_mel(fmin), hz_to_mel(fmax));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mlo + (mhi - mlo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = sample_rate as f64 / n_fft as f64;
        let mut weights = Array2::zeros((n_mels, n_bins));
        for m in 0..n_mels {
            let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let w = if f > lo && f <= c {
                    (f - lo) / (c - lo)
                } else if f > c && f < hi {
                    (hi - f) / (hi - c)
                } else {
                    0.0
                };
                weights[[m, k]] = w;
            }
        }
        Self {
            weights,
            centers_hz: edges[1..=n_mels].to_vec(),
        }
    }

    /// The 64-band, 0-8 kHz bank for 400-point frames.
    pub fn lfbe_default() -> Self {
        Self::new(N_MELS, LFBE_WINDOW, SAMPLE_RATE, 0.0, SAMPLE_RATE as f64 / 2.0)
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn n_mels(&self) -> usize {
        self.weights.nrows()
    }
}

/// `T x F` log Mel-filterbank energies. `F` is 64 for features produced by
/// [`Lfbe`]; other widths are accepted for small test models.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    values: Array2<f64>,
}

impl FeatureSequence {
    pub fn new(values: Array2<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn n_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    /// Zero-pads at the tail to at least `min_frames` frames.
    pub fn pad_to(&self, min_frames: usize) -> Self {
        if self.n_frames() >= min_frames {
            return self.clone();
        }
        let mut values = Array2::zeros((min_frames, self.n_features()));
        values
            .slice_mut(ndarray::s![..self.n_frames(), ..])
            .assign(&self.values);
        Self { values }
    }

    /// Frames `[start, start + len)`, zero-padded past the end.
    pub fn window(&self, start: usize, len: usize) -> Self {
        let mut values = Array2::zeros((len, self.n_features()));
        let end = (start + len).min(self.n_frames());
        if start < end {
            values
                .slice_mut(ndarray::s![..end - start, ..])
                .assign(&self.values.slice(ndarray::s![start..end, ..]));
        }
        Self { values }
    }
}

/// LFBE extractor: periodic Hann 400/160 framing, power spectrum, 64 mel
/// bands over 0-8 kHz, natural log of the floored energy.
#[derive(Debug, Clone)]
pub struct Lfbe {
    stft: Stft,
    bank: MelFilterbank,
    floor: f64,
}

impl Lfbe {
    pub fn new() -> Self {
        Self {
            stft: Stft::new(LFBE_WINDOW, LFBE_HOP, WindowKind::Hann).expect("LFBE framing is valid"),
            bank: MelFilterbank::lfbe_default(),
            floor: ENERGY_FLOOR,
        }
    }

    pub fn stft(&self) -> &Stft {
        &self.stft
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn extract(&self, audio: &AudioBuffer) -> Result<FeatureSequence, DspError> {
        let spec = self.stft.forward(audio)?;
        self.from_spectrogram(&spec)
    }

    pub fn from_spectrogram(&self, spec: &Spectrogram) -> Result<FeatureSequence, DspError> {
        if spec.n_bins() != self.bank.weights.ncols() {
            return Err(DspError::BinMismatch {
                got: spec.n_bins(),
                expected: self.bank.weights.ncols(),
            });
        }
        let power = spec.frames().mapv(|c| c.norm_sqr());
        let mut energies = power.dot(&self.bank.weights.t());
        energies.mapv_inplace(|e| e.max(self.floor).ln());
        Ok(FeatureSequence::new(energies))
    }

    /// Per-frame mean of the features, handy for sanity checks.
    pub fn frame_means(features: &FeatureSequence) -> Vec<f64> {
        features.values().mean_axis(Axis(1)).unwrap().to_vec()
    }
}

impl Default for Lfbe {
    fn default() -> Self {
        Self::new()
    }
}

pub fn lfbe(audio: &AudioBuffer) -> Result<FeatureSequence, DspError> {
    Lfbe::new().extract(audio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn silence_sits_on_the_floor() {
        let f = lfbe(&AudioBuffer::zeros(16_000)).unwrap();
        assert_eq!(f.n_frames(), 98);
        assert_eq!(f.n_features(), 64);
        assert!(f.values().iter().all(|&v| v == ENERGY_FLOOR.ln()));
    }

    #[test]
    fn filter_rows_are_positive_and_overlap() {
        let bank = MelFilterbank::lfbe_default();
        let w = bank.weights();
        assert_eq!(w.dim(), (64, 201));
        for m in 0..64 {
            assert!(w.row(m).sum() > 0.0, "filter {m} is empty");
        }
        let c = bank.centers_hz();
        assert!(c.windows(2).all(|p| p[0] < p[1]));
        // Above ~1 kHz the triangles are wider than a bin, so neighbours
        // share sampled support too.
        for m in 20..63 {
            let overlap = w.row(m).iter().zip(w.row(m + 1)).any(|(a, b)| *a > 0.0 && *b > 0.0);
            assert!(overlap, "filters {m} and {} do not overlap", m + 1);
        }
        // Between the first and last centre, the unnormalised triangles form
        // a partition of unity.
        let (c0, c1) = (bank.centers_hz()[0], bank.centers_hz()[63]);
        for k in 0..201 {
            let f = k as f64 * 40.0;
            if f >= c0 && f <= c1 {
                let s: f64 = w.column(k).sum();
                assert!((s - 1.0).abs() < 1e-12, "bin {k}: column sum {s}");
            }
        }
    }

    #[test]
    fn mel_scale_round_trips() {
        for f in [0.0, 100.0, 700.0, 4000.0, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
        assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn gain_never_lowers_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..8000).map(|_| rng.random_range(-0.1..0.1)).collect();
        let a = AudioBuffer::new(x).unwrap();
        let fa = lfbe(&a).unwrap();
        let fb = lfbe(&a.scaled(2.5)).unwrap();
        for (p, q) in fa.values().iter().zip(fb.values()) {
            assert!(q >= p);
        }
    }

    #[test]
    fn pad_and_window() {
        let f = FeatureSequence::new(Array2::ones((3, 2)));
        let p = f.pad_to(5);
        assert_eq!(p.n_frames(), 5);
        assert_eq!(p.values()[[4, 1]], 0.0);
        assert_eq!(p.values()[[2, 1]], 1.0);
        let w = f.window(2, 3);
        assert_eq!(w.values().column(0).to_vec(), vec![1.0, 0.0, 0.0]);
    }
}
