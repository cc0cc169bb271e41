use ndarray::{s, Array2};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sir_gain, MixError, MixtureTriplet};
use crate::dsp::Spectrogram;

/// Upper bound on pair draws before giving up on zero-energy inputs.
pub const MAX_RESAMPLE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    /// Inclusive range of the interferer delay in STFT frames.
    pub shift_frames: (usize, usize),
    pub sir_db: (f64, f64),
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            shift_frames: (15, 20),
            sir_db: (-20.0, 3.0),
        }
    }
}

/// Rows `[0, n)` of `x`, zero-padded or truncated.
fn fit_rows(x: &Array2<Complex64>, n: usize) -> Array2<Complex64> {
    let mut out = Array2::zeros((n, x.ncols()));
    let m = n.min(x.nrows());
    out.slice_mut(s![..m, ..]).assign(&x.slice(s![..m, ..]));
    out
}

/// Builds one augmented training example from two clean clips: `x_i` is the
/// target, `x_j` becomes the reference, and a copy of `x_j` delayed by
/// `k` frames is the interferer. `x_j`'s label is discarded.
///
/// Draw order from `rng`: shift, then SIR.
pub fn augment_triplet<R: Rng + ?Sized>(
    example_i: (&Spectrogram, usize),
    example_j: (&Spectrogram, usize),
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<MixtureTriplet<Spectrogram>, MixError> {
    let (xi, label) = example_i;
    let (xj, _) = example_j;
    if !xi.same_framing(xj) || xi.n_bins() != xj.n_bins() {
        return Err(MixError::FramingMismatch);
    }
    let k = rng.random_range(cfg.shift_frames.0..=cfg.shift_frames.1);
    let sir_db = if cfg.sir_db.0 < cfg.sir_db.1 {
        rng.random_range(cfg.sir_db.0..cfg.sir_db.1)
    } else {
        cfg.sir_db.0
    };
    augment_with(xi, label, xj, k, sir_db)
}

/// Deterministic core of [`augment_triplet`] for a given shift and SIR.
pub(crate) fn augment_with(
    xi: &Spectrogram,
    label: usize,
    xj: &Spectrogram,
    k: usize,
    sir_db: f64,
) -> Result<MixtureTriplet<Spectrogram>, MixError> {
    if !sir_db.is_finite() {
        return Err(MixError::BadSir(sir_db));
    }
    let t = xi.n_frames();
    let u = xi.frames();
    let r = xj.frames();
    let mut n = Array2::<Complex64>::zeros((t, xi.n_bins()));
    if k < t {
        let m = (t - k).min(r.nrows());
        n.slice_mut(s![k..k + m, ..]).assign(&r.slice(s![..m, ..]));
    }
    let overlap = t.min(xj.n_frames());
    let pu = xi.power_over(overlap);
    let shifted = xi.with_frames(n)?;
    let pn = shifted.power_over(overlap);
    if pu == 0.0 {
        return Err(MixError::ZeroEnergy("target"));
    }
    if pn == 0.0 {
        return Err(MixError::ZeroEnergy("interferer"));
    }
    let g = sir_gain(pu, pn, sir_db);
    let n = shifted.into_frames().mapv(|c| c * g);
    let y = u + &n;
    Ok(MixtureTriplet {
        mixture: xi.with_frames(y)?,
        reference: xi.with_frames(fit_rows(r, t))?,
        interferer: Some(xi.with_frames(n)?),
        target: Some(xi.clone()),
        label,
        sir_db,
        shift_frames: k,
    })
}

/// Draws interferer clips from a pool, retrying when a draw has no energy.
#[derive(Debug, Clone, Copy)]
pub struct TripletSampler {
    pub config: AugmentConfig,
    pub max_draws: usize,
}

impl Default for TripletSampler {
    fn default() -> Self {
        Self {
            config: AugmentConfig::default(),
            max_draws: MAX_RESAMPLE,
        }
    }
}

impl TripletSampler {
    /// Samples a triplet from a pool of `pool_len` clips loaded by `fetch`.
    /// With `target = Some(i)` the target is fixed and only the reference is
    /// redrawn; a silent target is then reported as an error immediately.
    /// Otherwise both roles are drawn uniformly.
    pub fn sample<R, F>(
        &self,
        pool_len: usize,
        target: Option<usize>,
        rng: &mut R,
        mut fetch: F,
    ) -> Result<MixtureTriplet<Spectrogram>, MixError>
    where
        R: Rng + ?Sized,
        F: FnMut(usize) -> Result<(Spectrogram, usize), MixError>,
    {
        if pool_len == 0 {
            return Err(MixError::ResampleExhausted(0));
        }
        let fixed = target.map(&mut fetch).transpose()?;
        for _ in 0..self.max_draws {
            let i = target.unwrap_or_else(|| rng.random_range(0..pool_len));
            let j = if pool_len > 1 {
                let j = rng.random_range(0..pool_len - 1);
                j + usize::from(j >= i)
            } else {
                i
            };
            let drawn;
            let xi = match &fixed {
                Some(x) => x,
                None => {
                    drawn = fetch(i)?;
                    &drawn
                }
            };
            let xj = fetch(j)?;
            match augment_triplet((&xi.0, xi.1), (&xj.0, xj.1), &self.config, rng) {
                Ok(t) => return Ok(t),
                Err(MixError::ZeroEnergy("target")) if target.is_some() => return Err(MixError::ZeroEnergy("target")),
                Err(MixError::ZeroEnergy(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Err(MixError::ResampleExhausted(self.max_draws))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{stft, AudioBuffer, WindowKind};
    use crate::seed::rng_for;

    fn noise_spec(seed: u64, len: usize) -> Spectrogram {
        let mut rng = rng_for(seed, &[]);
        let x: Vec<f64> = (0..len).map(|_| rng.random_range(-0.5..0.5)).collect();
        stft(&AudioBuffer::new(x).unwrap(), 400, 160, WindowKind::Hann).unwrap()
    }

    #[test]
    fn shift_definition() {
        let u = noise_spec(1, 16000);
        let r = noise_spec(2, 16000);
        let t = augment_with(&u, 3, &r, 15, 0.0).unwrap();
        let n = t.interferer.as_ref().unwrap().frames();
        let g = {
            let a = n[[20, 5]];
            let b = r.frames()[[5, 5]];
            a.norm() / b.norm()
        };
        for f in 0..15 {
            assert!(n.row(f).iter().all(|c| c.norm() == 0.0));
        }
        for f in 15..u.n_frames() {
            for b in 0..u.n_bins() {
                assert!((n[[f, b]] - r.frames()[[f - 15, b]] * g).norm() < 1e-9);
            }
        }
        assert_eq!(t.reference.frames(), r.frames());
        assert_eq!(t.label, 3);
    }

    #[test]
    fn mixture_is_exact_sum_and_sir_remeasures() {
        let u = noise_spec(3, 16000);
        let r = noise_spec(4, 12000);
        for seed in 0..10 {
            let mut rng = rng_for(seed, &[]);
            let t = augment_triplet((&u, 1), (&r, 7), &AugmentConfig::default(), &mut rng).unwrap();
            assert!((15..=20).contains(&t.shift_frames));
            assert!((-20.0..3.0).contains(&t.sir_db));
            assert_eq!(t.label, 1);
            let n = t.interferer.as_ref().unwrap();
            let y = t.mixture.frames();
            assert_eq!(*y, u.frames() + n.frames());
            let overlap = u.n_frames().min(r.n_frames());
            let sir = 10.0 * (u.power_over(overlap) / n.power_over(overlap)).log10();
            assert!((sir - t.sir_db).abs() < 1e-6, "{sir} vs {}", t.sir_db);
            assert_eq!(t.reference.n_frames(), u.n_frames());
        }
    }

    #[test]
    fn same_seed_same_triplet() {
        let u = noise_spec(5, 8000);
        let r = noise_spec(6, 8000);
        let cfg = AugmentConfig::default();
        let a = augment_triplet((&u, 0), (&r, 1), &cfg, &mut rng_for(9, &[0, 1])).unwrap();
        let b = augment_triplet((&u, 0), (&r, 1), &cfg, &mut rng_for(9, &[0, 1])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampler_skips_silent_references() {
        let pool = vec![
            (noise_spec(7, 8000), 0usize),
            (Spectrogram::zeros(48, 400, 160, WindowKind::Hann), 1),
            (noise_spec(8, 8000), 2),
        ];
        let sampler = TripletSampler::default();
        for seed in 0..20 {
            let mut rng = rng_for(seed, &[]);
            let t = sampler
                .sample(pool.len(), Some(0), &mut rng, |i| Ok(pool[i].clone()))
                .unwrap();
            assert_eq!(t.label, 0);
            assert!(t.reference.power_over(usize::MAX) > 0.0);
        }
        let mut rng = rng_for(0, &[]);
        assert!(matches!(
            sampler.sample(pool.len(), Some(1), &mut rng, |i| Ok(pool[i].clone())),
            Err(MixError::ZeroEnergy("target"))
        ));
    }

    #[test]
    fn framing_mismatch_rejected() {
        let u = noise_spec(1, 4000);
        let r = Spectrogram::zeros(10, 512, 128, WindowKind::SqrtHann);
        let mut rng = rng_for(0, &[]);
        assert!(matches!(
            augment_triplet((&u, 0), (&r, 0), &AugmentConfig::default(), &mut rng),
            Err(MixError::FramingMismatch)
        ));
    }
}
