//! SIR-controlled mixing, on-the-fly triplet augmentation and offline
//! playback dataset synthesis.

mod augment;
mod manifest;
mod synth;

use thiserror::Error;

use crate::dsp::{AudioBuffer, DspError};
use crate::roomsim::RoomError;

pub use augment::{augment_triplet, AugmentConfig, TripletSampler, MAX_RESAMPLE};
pub use manifest::{Condition, DatasetManifestEntry, Manifest, ManifestHeader, Split, MANIFEST_FORMAT};
pub use synth::{build_speechcommands_mix, recompute_interferer, GscClip, GscCorpus, SynthOptions};

#[derive(Debug, Error)]
pub enum MixError {
    #[error("{0} has zero energy over the overlap region, SIR is undefined")]
    ZeroEnergy(&'static str),
    #[error("non-finite SIR {0}")]
    BadSir(f64),
    #[error("spectrograms use different framing")]
    FramingMismatch,
    #[error("no nonzero pair found after {0} draws")]
    ResampleExhausted(usize),
    #[error("{path}: {reason}")]
    Corpus { path: String, reason: String },
    #[error("manifest {path}, line {line}: {reason}")]
    Manifest { path: String, line: usize, reason: String },
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Room(#[from] RoomError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl MixError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        MixError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

/// Mixture `y = u + n` with its reference `r` and, when known, the oracle
/// target `u` and interferer `n`. `S` is the signal domain: time-domain
/// [`AudioBuffer`] or complex [`crate::dsp::Spectrogram`].
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureTriplet<S> {
    pub mixture: S,
    pub reference: S,
    pub interferer: Option<S>,
    pub target: Option<S>,
    /// Class of the target; the interferer's own label never appears here.
    pub label: usize,
    pub sir_db: f64,
    pub shift_frames: usize,
}

/// `10 log10(P_target / P_interferer)` over the first `min(len)` samples.
pub fn measure_sir_db(target: &[f64], interferer: &[f64]) -> Option<f64> {
    let overlap = target.len().min(interferer.len());
    let pu: f64 = target[..overlap].iter().map(|x| x * x).sum();
    let pn: f64 = interferer[..overlap].iter().map(|x| x * x).sum();
    (pu > 0.0 && pn > 0.0).then(|| 10.0 * (pu / pn).log10())
}

/// Gain bringing an interferer of power `pn` to `sir_db` below a target of
/// power `pu`.
pub fn sir_gain(pu: f64, pn: f64, sir_db: f64) -> f64 {
    (pu / (pn * 10f64.powf(sir_db / 10.0))).sqrt()
}

/// Scales `interferer` so the target-to-interferer power ratio over the
/// overlap region equals `sir_db`, then adds it to `target`. The shorter
/// signal is zero-padded at the tail. Returns `(mixture, scaled_interferer)`.
pub fn mix_at_sir(
    target: &AudioBuffer,
    interferer: &AudioBuffer,
    sir_db: f64,
) -> Result<(AudioBuffer, AudioBuffer), MixError> {
    if !sir_db.is_finite() {
        return Err(MixError::BadSir(sir_db));
    }
    let overlap = target.len().min(interferer.len());
    let power = |x: &[f64]| x[..overlap].iter().map(|v| v * v).sum::<f64>() / overlap.max(1) as f64;
    let pu = power(target.samples());
    let pn = power(interferer.samples());
    if pu == 0.0 {
        return Err(MixError::ZeroEnergy("target"));
    }
    if pn == 0.0 {
        return Err(MixError::ZeroEnergy("interferer"));
    }
    let g = sir_gain(pu, pn, sir_db);
    let len = target.len().max(interferer.len());
    let scaled = interferer.fit_to(len).scaled(g);
    let mixture: Vec<f64> = target
        .fit_to(len)
        .samples()
        .iter()
        .zip(scaled.samples())
        .map(|(u, n)| u + n)
        .collect();
    Ok((AudioBuffer::new(mixture)?, scaled))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;
    use rand::Rng;

    fn buf(v: Vec<f64>) -> AudioBuffer {
        AudioBuffer::new(v).unwrap()
    }

    #[test]
    fn equal_power_zero_db_is_unit_gain() {
        let u = buf(vec![1.0, -1.0, 1.0, -1.0]);
        let n = buf(vec![-1.0, -1.0, 1.0, 1.0]);
        let (_, s) = mix_at_sir(&u, &n, 0.0).unwrap();
        assert_eq!(s.samples(), n.samples());
    }

    #[test]
    fn equal_power_six_db() {
        let u = buf(vec![1.0, -1.0, 1.0, -1.0]);
        let (_, s) = mix_at_sir(&u, &u, 6.0).unwrap();
        let g = s.samples()[0];
        assert!((g - 10f64.powf(-6.0 / 20.0)).abs() < 1e-12);
        assert!((g - 0.501187).abs() < 1e-6);
    }

    #[test]
    fn remeasured_sir_matches_request() {
        let mut rng = rng_for(1, &[]);
        let u = buf((0..1000).map(|_| rng.random_range(-0.3..0.3)).collect());
        let n = buf((0..1400).map(|_| rng.random_range(-0.9..0.9)).collect());
        let (y, s) = mix_at_sir(&u, &n, -12.0).unwrap();
        assert_eq!(y.len(), 1400);
        let sir = measure_sir_db(u.samples(), s.samples()).unwrap();
        assert!((sir + 12.0).abs() < 1e-6);
        for i in 0..1400 {
            let ui = u.samples().get(i).copied().unwrap_or(0.0);
            assert_eq!(y.samples()[i], ui + s.samples()[i]);
        }
    }

    #[test]
    fn zero_energy_is_rejected() {
        let u = buf(vec![0.0; 10]);
        let n = buf(vec![1.0; 10]);
        assert!(matches!(mix_at_sir(&u, &n, 0.0), Err(MixError::ZeroEnergy("target"))));
        assert!(matches!(
            mix_at_sir(&n, &u, 0.0),
            Err(MixError::ZeroEnergy("interferer"))
        ));
    }
}
