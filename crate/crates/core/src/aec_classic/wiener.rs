use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::AecError;
use crate::dsp::{fir_convolve_full, AudioBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WienerConfig {
    pub taps: usize,
    /// Most negative lag; lags cover `[min_lag, min_lag + taps - 1]`.
    pub min_lag: i64,
    /// Tikhonov weight relative to the mean diagonal of the normal matrix.
    pub regularizer: f64,
}

impl Default for WienerConfig {
    fn default() -> Self {
        Self {
            taps: 512,
            min_lag: -256,
            regularizer: 1e-9,
        }
    }
}

impl WienerConfig {
    pub fn lag_range(&self) -> (i64, i64) {
        (self.min_lag, self.min_lag + self.taps as i64 - 1)
    }

    fn validate(&self) -> Result<(), AecError> {
        if self.taps == 0 {
            return Err(AecError::Config("wiener taps must be positive".into()));
        }
        if !(self.regularizer > 0.0 && self.regularizer.is_finite()) {
            return Err(AecError::Config("wiener regularizer must be positive".into()));
        }
        Ok(())
    }
}

fn at(x: &[f64], i: i64) -> f64 {
    if i >= 0 && (i as usize) < x.len() {
        x[i as usize]
    } else {
        0.0
    }
}

/// Least-squares FIR `w` over the configured lags minimising
/// `sum_t (d(t) - sum_l w_l r(t - l))^2` for `t in [0, len)`, with `r` zero
/// outside its support. Returns the taps ordered by lag.
pub fn wiener_oracle_filter(desired: &[f64], reference: &[f64], cfg: &WienerConfig) -> Result<Vec<f64>, AecError> {
    cfg.validate()?;
    if desired.len() != reference.len() {
        return Err(AecError::Length(format!(
            "desired {} vs reference {}",
            desired.len(),
            reference.len()
        )));
    }
    let n = reference.len() as i64;
    let dim = cfg.taps;
    let lag = |a: usize| cfg.min_lag + a as i64;
    let r = reference;

    // Gram matrix G[a][b] = sum_t r(t - l_a) r(t - l_b). The first row is
    // summed directly; the rest follows from shifting both lags by one.
    let mut g = DMatrix::<f64>::zeros(dim, dim);
    let l0 = lag(0);
    for b in 0..dim {
        let lb = lag(b);
        let lo = l0.max(lb).max(0);
        let hi = n.min(n + l0).min(n + lb);
        g[(0, b)] = (lo..hi).map(|t| r[(t - l0) as usize] * r[(t - lb) as usize]).sum();
    }
    for a in 0..dim - 1 {
        for b in a..dim - 1 {
            let (la, lb) = (lag(a), lag(b));
            g[(a + 1, b + 1)] = g[(a, b)] + at(r, -1 - la) * at(r, -1 - lb) - at(r, n - 1 - la) * at(r, n - 1 - lb);
        }
    }
    for a in 0..dim {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    let rhs = DVector::from_fn(dim, |a, _| {
        let l = lag(a);
        let lo = l.max(0);
        let hi = n.min(n + l);
        (lo..hi).map(|t| desired[t as usize] * r[(t - l) as usize]).sum::<f64>()
    });

    let trace: f64 = (0..dim).map(|a| g[(a, a)]).sum();
    let mut lambda = (cfg.regularizer * trace / dim as f64).max(f64::MIN_POSITIVE);
    for _ in 0..8 {
        let mut m = g.clone();
        for a in 0..dim {
            m[(a, a)] += lambda;
        }
        if let Some(ch) = m.cholesky() {
            return Ok(ch.solve(&rhs).iter().copied().collect());
        }
        lambda *= 100.0;
    }
    Err(AecError::Singular)
}

/// Oracle canceller: fits `w` to the true interferer `y - u` and returns
/// `y - w * r`.
pub fn wiener_oracle_cancel(
    mixture: &AudioBuffer,
    reference: &AudioBuffer,
    target: &AudioBuffer,
    cfg: &WienerConfig,
) -> Result<AudioBuffer, AecError> {
    let len = mixture.len();
    if target.len() != len {
        return Err(AecError::Length(format!("mixture {len} vs target {}", target.len())));
    }
    let reference = reference.fit_to(len);
    let desired: Vec<f64> = mixture
        .samples()
        .iter()
        .zip(target.samples())
        .map(|(y, u)| y - u)
        .collect();
    let w = wiener_oracle_filter(&desired, reference.samples(), cfg)?;
    let echo = apply_lagged(&w, cfg.min_lag, reference.samples());
    let out = mixture.samples().iter().zip(&echo).map(|(y, e)| y - e).collect();
    Ok(AudioBuffer::new(out)?)
}

/// `sum_a w[a] r(t - min_lag - a)` for `t in [0, len(r))`.
pub(crate) fn apply_lagged(w: &[f64], min_lag: i64, r: &[f64]) -> Vec<f64> {
    if r.is_empty() {
        return Vec::new();
    }
    let full = fir_convolve_full(r, w);
    (0..r.len() as i64).map(|t| at(&full, t - min_lag)).collect()
}
