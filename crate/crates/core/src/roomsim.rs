//! Image-source room impulse responses for the device playback path.
//!
//! A shoebox room with uniform, frequency-independent wall reflection is
//! simulated with the image method. Each image arrives through an 81-tap
//! Hann-windowed sinc so that fractional delays are band-limited, and is
//! weighted by the microphone polar pattern evaluated towards the image.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{fir_convolve_full, AudioBuffer, SAMPLE_RATE};

pub const SPEED_OF_SOUND: f64 = 343.0;
/// Maximum source/microphone distance of a playback path.
pub const PLAYBACK_RADIUS: f64 = 0.05;
pub const AREA_RANGE: (f64, f64) = (10.0, 50.0);
pub const T60_RANGE: (f64, f64) = (0.2, 0.6);
pub const ASPECT_RANGE: (f64, f64) = (0.5, 2.0);
pub const HEIGHT_RANGE: (f64, f64) = (2.4, 3.5);
pub const WALL_MARGIN: f64 = 0.3;
/// Interpolator length for fractional delays.
pub const SINC_TAPS: usize = 81;
/// Relative T60 error above which a calibrated RIR is re-solved once.
const RECALIBRATE_TOLERANCE: f64 = 0.06;
/// Default tail kept after the reference when reverberating.
pub const DEFAULT_TAIL_SECS: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum RoomError {
    #[error("source and microphone coincide")]
    Degenerate,
    #[error("{what} {pos:?} lies outside the {dims:?} m room")]
    OutsideRoom {
        what: &'static str,
        pos: [f64; 3],
        dims: [f64; 3],
    },
    #[error("invalid room configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MicPattern {
    Cardioid,
    Omni,
}

impl MicPattern {
    /// Gain towards an arrival from `direction` (mic -> image) for a capsule
    /// pointing along `orientation`.
    pub fn gain(self, orientation: [f64; 3], direction: [f64; 3]) -> f64 {
        match self {
            MicPattern::Omni => 1.0,
            MicPattern::Cardioid => {
                let dot = orientation[0] * direction[0] + orientation[1] * direction[1] + orientation[2] * direction[2];
                let norms = (norm_sq(orientation) * norm_sq(direction)).sqrt();
                if norms == 0.0 {
                    return 0.5;
                }
                let cos = (dot / norms).clamp(-1.0, 1.0);
                0.5 * (1.0 + cos)
            }
        }
    }
}

fn norm_sq(v: [f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm_sq([a[0] - b[0], a[1] - b[1], a[2] - b[2]]).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomConfig {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub t60: f64,
    pub source_pos: [f64; 3],
    pub mic_pos: [f64; 3],
    pub mic_orientation: [f64; 3],
    pub mic_pattern: MicPattern,
}

impl RoomConfig {
    pub fn dims(&self) -> [f64; 3] {
        [self.length, self.width, self.height]
    }

    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    pub fn volume(&self) -> f64 {
        self.length * self.width * self.height
    }

    pub fn surface(&self) -> f64 {
        2.0 * (self.length * self.width + self.length * self.height + self.width * self.height)
    }

    pub fn source_mic_distance(&self) -> f64 {
        distance(self.source_pos, self.mic_pos)
    }

    /// Whether the microphone sits close enough to the source to model a
    /// device's own loudspeaker return.
    pub fn is_playback_path(&self) -> bool {
        self.source_mic_distance() <= PLAYBACK_RADIUS
    }

    /// Checks the room shape, reverberation time and that both transducers
    /// lie strictly inside the room.
    pub fn validate(&self) -> Result<(), RoomError> {
        let area = self.area();
        if !(AREA_RANGE.0..=AREA_RANGE.1).contains(&area) {
            return Err(RoomError::Invalid(format!("floor area {area:.3} m^2 outside [10, 50]")));
        }
        if !(T60_RANGE.0..=T60_RANGE.1).contains(&self.t60) {
            return Err(RoomError::Invalid(format!("t60 {:.3} s outside [0.2, 0.6]", self.t60)));
        }
        if !(self.height > 0.0) {
            return Err(RoomError::Invalid(format!("height {}", self.height)));
        }
        let dims = self.dims();
        for (what, pos) in [("source", self.source_pos), ("microphone", self.mic_pos)] {
            if (0..3).any(|i| !(pos[i] > 0.0 && pos[i] < dims[i])) {
                return Err(RoomError::OutsideRoom { what, pos, dims });
            }
        }
        if self.source_mic_distance() == 0.0 {
            return Err(RoomError::Degenerate);
        }
        Ok(())
    }
}

/// Draws a playback-path room: floor area, aspect ratio, height and T60
/// uniformly; the source uniformly inside the room away from the walls; the
/// microphone uniformly inside a 5 cm ball around it, pointing away from the
/// source with a cardioid pattern.
pub fn sample_room_config<R: Rng + ?Sized>(rng: &mut R) -> RoomConfig {
    let area = rng.random_range(AREA_RANGE.0..AREA_RANGE.1);
    let aspect = rng.random_range(ASPECT_RANGE.0..ASPECT_RANGE.1);
    let height = rng.random_range(HEIGHT_RANGE.0..HEIGHT_RANGE.1);
    let t60 = rng.random_range(T60_RANGE.0..T60_RANGE.1);
    let length = (area * aspect).sqrt();
    let width = area / length;
    let dims = [length, width, height];
    let source_pos: [f64; 3] = std::array::from_fn(|i| rng.random_range(WALL_MARGIN..dims[i] - WALL_MARGIN));
    // Uniform in the ball: isotropic direction, radius ~ R * cbrt(u).
    let offset = loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n2 = norm_sq(v);
        if n2 > 1e-6 && n2 <= 1.0 {
            let r = PLAYBACK_RADIUS * rng.random::<f64>().cbrt();
            let n = n2.sqrt();
            if r > 0.0 {
                break v.map(|c| c / n * r);
            }
        }
    };
    let mic_pos = std::array::from_fn(|i| source_pos[i] + offset[i]);
    RoomConfig {
        length,
        width,
        height,
        t60,
        source_pos,
        mic_pos,
        mic_orientation: offset,
        mic_pattern: MicPattern::Cardioid,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsorptionModel {
    /// `T60 = 0.161 V / (S a)`.
    Sabine,
    /// `T60 = 0.161 V / (-S ln(1 - a))`.
    Eyring,
    /// Reflection coefficient solved so the image set's own energy decay
    /// reaches the target T60 under the Schroeder -5/-35 dB fit. Shoebox
    /// image sets decay more slowly than either diffuse-field formula
    /// predicts, so this is the only model whose measured T60 tracks the
    /// request.
    Calibrated,
}

impl AbsorptionModel {
    /// Uniform pressure reflection coefficient `sqrt(1 - a)` for a room
    /// whose RIR is rendered over `n_samples`.
    pub fn reflection(self, config: &RoomConfig, n_samples: usize) -> f64 {
        let x = 0.161 * config.volume() / (config.surface() * config.t60);
        let alpha = match self {
            AbsorptionModel::Sabine | AbsorptionModel::Calibrated => x,
            AbsorptionModel::Eyring => 1.0 - (-x).exp(),
        };
        let diffuse = (1.0 - alpha.clamp(0.0, 1.0)).sqrt();
        match self {
            AbsorptionModel::Calibrated => DecayHistogram::new(config, n_samples).solve_reflection(config.t60, diffuse),
            AbsorptionModel::Sabine | AbsorptionModel::Eyring => diffuse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RirOptions {
    pub absorption: AbsorptionModel,
    /// RIR length as a multiple of the configured T60.
    pub duration_factor: f64,
    /// Apply the 100 Hz Allen-Berkley high-pass that removes the coherent
    /// low-frequency build-up of the all-positive image impulses.
    pub highpass: bool,
}

impl Default for RirOptions {
    fn default() -> Self {
        Self {
            absorption: AbsorptionModel::Calibrated,
            duration_factor: 1.0,
            highpass: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    taps: Vec<f64>,
    /// Geometric arrival time of the direct path in (fractional) samples.
    direct_path_delay: f64,
}

impl ImpulseResponse {
    pub fn new(taps: Vec<f64>, direct_path_delay: f64) -> Self {
        Self {
            taps,
            direct_path_delay,
        }
    }

    /// A pure gain-and-delay path `gain * delta[delay]`.
    pub fn delayed_impulse(delay: usize, gain: f64) -> Self {
        let mut taps = vec![0.0; delay + 1];
        taps[delay] = gain;
        Self::new(taps, delay as f64)
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn direct_path_delay(&self) -> f64 {
        self.direct_path_delay
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }

    /// Schroeder energy decay curve in dB relative to the total energy.
    pub fn energy_decay_curve_db(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut edc: Vec<f64> = self
            .taps
            .iter()
            .rev()
            .map(|t| {
                acc += t * t;
                acc
            })
            .collect();
        edc.reverse();
        let total = edc.first().copied().unwrap_or(0.0);
        edc.iter()
            .map(|&e| {
                if total > 0.0 && e > 0.0 {
                    10.0 * (e / total).log10()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect()
    }

    /// T60 from a least-squares line through the decay curve between -5 and
    /// -35 dB, extrapolated to 60 dB. `None` if the curve never reaches -35 dB.
    pub fn schroeder_t60(&self) -> Option<f64> {
        let edc = self.energy_decay_curve_db();
        let start = edc.iter().position(|&d| d <= -5.0)?;
        let end = edc.iter().position(|&d| d <= -35.0)?;
        if end <= start + 1 {
            return None;
        }
        let n = (end - start + 1) as f64;
        let fs = SAMPLE_RATE as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for (i, &d) in edc.iter().enumerate().take(end + 1).skip(start) {
            let t = i as f64 / fs;
            sx += t;
            sy += d;
            sxx += t * t;
            sxy += t * d;
        }
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        (slope < 0.0).then(|| -60.0 / slope)
    }
}

/// Image-source RIR of `config` with the default options.
pub fn image_source_rir(config: &RoomConfig) -> Result<ImpulseResponse, RoomError> {
    image_source_rir_with(config, &RirOptions::default())
}

pub fn image_source_rir_with(config: &RoomConfig, options: &RirOptions) -> Result<ImpulseResponse, RoomError> {
    config.validate()?;
    let n_samples = (options.duration_factor * config.t60 * SAMPLE_RATE as f64).ceil() as usize;
    let render = |beta: f64| {
        let mut rir = render_images(config, beta, n_samples);
        if options.highpass {
            allen_berkley_highpass(&mut rir.taps);
        }
        rir
    };
    if options.absorption != AbsorptionModel::Calibrated {
        return Ok(render(options.absorption.reflection(config, n_samples)));
    }
    // The histogram ignores interference between overlapping arrivals, so
    // the rendered decay can still run long; one corrective re-solve against
    // the measured T60 brings it back.
    let histogram = DecayHistogram::new(config, n_samples);
    let beta = histogram.solve_reflection(config.t60, AbsorptionModel::Sabine.reflection(config, n_samples));
    let rir = render(beta);
    match rir.schroeder_t60() {
        Some(measured) if (measured / config.t60 - 1.0).abs() > RECALIBRATE_TOLERANCE => {
            let corrected = config.t60 * config.t60 / measured;
            Ok(render(histogram.solve_reflection(corrected, beta)))
        }
        _ => Ok(rir),
    }
}

/// Image method with an explicit uniform reflection coefficient. Only the
/// geometry of `config` is used; its T60 is ignored.
pub fn image_source_rir_with_reflection(
    config: &RoomConfig,
    reflection: f64,
    n_samples: usize,
) -> Result<ImpulseResponse, RoomError> {
    if config.source_mic_distance() == 0.0 {
        return Err(RoomError::Degenerate);
    }
    if !(0.0..=1.0).contains(&reflection) {
        return Err(RoomError::Invalid(format!("reflection coefficient {reflection}")));
    }
    Ok(render_images(config, reflection, n_samples))
}

/// Second-order high-pass at 100 Hz from Allen & Berkley's image method.
fn allen_berkley_highpass(taps: &mut [f64]) {
    let w = 2.0 * PI * 100.0 / SAMPLE_RATE as f64;
    let r1 = (-w).exp();
    let b1 = 2.0 * r1 * w.cos();
    let b2 = -r1 * r1;
    let a1 = -(1.0 + r1);
    let mut y = [0.0f64; 3];
    for t in taps.iter_mut() {
        y[2] = y[1];
        y[1] = y[0];
        y[0] = b1 * y[1] + b2 * y[2] + *t;
        *t = y[0] + a1 * y[1] + r1 * y[2];
    }
}

/// Calls `visit(distance, reflection_order, pattern_gain)` for every image
/// closer than `max_dist` metres.
fn for_each_image(config: &RoomConfig, max_dist: f64, mut visit: impl FnMut(f64, i32, f64)) {
    let dims = config.dims();
    let src = config.source_pos;
    let mic = config.mic_pos;
    let bound = |i: usize| (max_dist / (2.0 * dims[i])).ceil() as i64 + 1;
    let (nx, ny, nz) = (bound(0), bound(1), bound(2));
    let max_d2 = max_dist * max_dist;

    for mx in -nx..=nx {
        for qx in 0..2i64 {
            let ix = (1 - 2 * qx) as f64 * src[0] + 2.0 * mx as f64 * dims[0] - mic[0];
            let ox = (mx - qx).abs() + mx.abs();
            if ix * ix > max_d2 {
                continue;
            }
            for my in -ny..=ny {
                for qy in 0..2i64 {
                    let iy = (1 - 2 * qy) as f64 * src[1] + 2.0 * my as f64 * dims[1] - mic[1];
                    let oy = (my - qy).abs() + my.abs();
                    let dxy2 = ix * ix + iy * iy;
                    if dxy2 > max_d2 {
                        continue;
                    }
                    for mz in -nz..=nz {
                        for qz in 0..2i64 {
                            let iz = (1 - 2 * qz) as f64 * src[2] + 2.0 * mz as f64 * dims[2] - mic[2];
                            let dist = (dxy2 + iz * iz).sqrt();
                            if dist >= max_dist || dist == 0.0 {
                                continue;
                            }
                            let order = (ox + oy + (mz - qz).abs() + mz.abs()) as i32;
                            let pattern = config.mic_pattern.gain(config.mic_orientation, [ix, iy, iz]);
                            visit(dist, order, pattern);
                        }
                    }
                }
            }
        }
    }
}

fn render_images(config: &RoomConfig, beta: f64, n_samples: usize) -> ImpulseResponse {
    let samples_per_metre = SAMPLE_RATE as f64 / SPEED_OF_SOUND;
    let max_dist = n_samples as f64 / samples_per_metre;
    let half = (SINC_TAPS / 2) as i64;
    let step = PI / (half + 1) as f64;
    let rotation = step.sin_cos();
    let mut taps = vec![0.0; n_samples];
    for_each_image(config, max_dist, |dist, order, pattern| {
        let refl = if order == 0 { 1.0 } else { beta.powi(order) };
        if refl == 0.0 || pattern == 0.0 {
            return;
        }
        let gain = refl * pattern / (4.0 * PI * dist);
        add_fractional_impulse(&mut taps, dist * samples_per_metre, gain, half, rotation);
    });
    ImpulseResponse::new(taps, config.source_mic_distance() * samples_per_metre)
}

/// Image energy binned by arrival time and reflection order, so the energy
/// decay curve can be evaluated for any reflection coefficient without
/// re-enumerating images.
struct DecayHistogram {
    /// `bins x orders`, energy `(pattern / 4 pi d)^2` before reflection loss.
    energy: Vec<Vec<f64>>,
    bin_secs: f64,
}

impl DecayHistogram {
    const BIN_SAMPLES: usize = 16;

    fn new(config: &RoomConfig, n_samples: usize) -> Self {
        let samples_per_metre = SAMPLE_RATE as f64 / SPEED_OF_SOUND;
        let max_dist = n_samples as f64 / samples_per_metre;
        let n_bins = n_samples.div_ceil(Self::BIN_SAMPLES).max(1);
        let mut energy = vec![Vec::<f64>::new(); n_bins];
        for_each_image(config, max_dist, |dist, order, pattern| {
            let bin = ((dist * samples_per_metre) as usize / Self::BIN_SAMPLES).min(n_bins - 1);
            let row = &mut energy[bin];
            if row.len() <= order as usize {
                row.resize(order as usize + 1, 0.0);
            }
            let g = pattern / (4.0 * PI * dist);
            row[order as usize] += g * g;
        });
        Self {
            energy,
            bin_secs: Self::BIN_SAMPLES as f64 / SAMPLE_RATE as f64,
        }
    }

    fn decay_curve(&self, beta: f64) -> ImpulseResponse {
        let b2 = beta * beta;
        let taps = self
            .energy
            .iter()
            .map(|row| {
                // Horner in beta^2, highest order first.
                row.iter().rev().fold(0.0, |acc, &e| acc * b2 + e).sqrt()
            })
            .collect();
        ImpulseResponse::new(taps, 0.0)
    }

    fn t60(&self, beta: f64) -> Option<f64> {
        // The histogram's bins stand in for samples; rescale the time axis.
        let per_sample = self.decay_curve(beta).schroeder_t60()?;
        Some(per_sample * self.bin_secs * SAMPLE_RATE as f64)
    }

    /// Bisection on the reflection coefficient; `guess` only seeds the
    /// bracket ordering and is returned if the target is unreachable.
    fn solve_reflection(&self, target: f64, guess: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let too_long = |b: f64| self.t60(b).map_or(b > guess, |t| t > target);
        if !too_long(hi - 1e-9) {
            return guess;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if too_long(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Adds `gain * w(n - tau) * sinc(n - tau)` for the `2*half + 1` taps around
/// `tau`, Hann window zero at `|t| = half + 1`. Taps outside the buffer are
/// dropped.
fn add_fractional_impulse(taps: &mut [f64], tau: f64, gain: f64, half: i64, (step_sin, step_cos): (f64, f64)) {
    let base = tau.floor() as i64;
    let frac = tau - base as f64;
    if frac == 0.0 {
        if let Some(t) = taps.get_mut(base as usize) {
            *t += gain;
        }
        return;
    }
    // sin(pi (k - frac)) = -(-1)^k sin(pi frac)
    let sin_pf = (PI * frac).sin();
    let width = (half + 1) as f64;
    let first = -half;
    // cos(pi t / width) advanced by rotation in steps of pi / width.
    let t0 = first as f64 - frac;
    let (mut s, mut c) = (PI * t0 / width).sin_cos();
    for k in first..=half {
        let idx = base + k;
        if idx >= 0 && (idx as usize) < taps.len() {
            let t = k as f64 - frac;
            let sign = if k.rem_euclid(2) == 0 { -1.0 } else { 1.0 };
            let sinc = sign * sin_pf / (PI * t);
            taps[idx as usize] += gain * 0.5 * (1.0 + c) * sinc;
        }
        let (s_next, c_next) = (s * step_cos + c * step_sin, c * step_cos - s * step_sin);
        s = s_next;
        c = c_next;
    }
}

/// Reverberates the reference through the playback path: full convolution
/// kept up to `len(reference) + tail` samples.
pub fn apply_playback_path(reference: &AudioBuffer, rir: &ImpulseResponse) -> AudioBuffer {
    apply_playback_path_with_tail(reference, rir, (DEFAULT_TAIL_SECS * SAMPLE_RATE as f64) as usize)
}

pub fn apply_playback_path_with_tail(reference: &AudioBuffer, rir: &ImpulseResponse, tail: usize) -> AudioBuffer {
    if reference.is_empty() || rir.taps().is_empty() {
        return AudioBuffer::zeros(reference.len());
    }
    let mut full = fir_convolve_full(reference.samples(), rir.taps());
    full.truncate(reference.len() + tail);
    AudioBuffer::new(full).expect("finite convolution")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    fn omni_room(src: [f64; 3], mic: [f64; 3]) -> RoomConfig {
        RoomConfig {
            length: 5.0,
            width: 4.0,
            height: 3.0,
            t60: 0.4,
            source_pos: src,
            mic_pos: mic,
            mic_orientation: [1.0, 0.0, 0.0],
            mic_pattern: MicPattern::Omni,
        }
    }

    #[test]
    fn sampling_is_deterministic_and_within_5cm() {
        for i in 0..500 {
            let a = sample_room_config(&mut rng_for(11, &[i]));
            let b = sample_room_config(&mut rng_for(11, &[i]));
            assert_eq!(a, b);
            assert!(a.source_mic_distance() <= PLAYBACK_RADIUS);
            assert!(a.validate().is_ok(), "{a:?}");
        }
    }

    #[test]
    fn cardioid_null_and_peak() {
        let o = [0.3, -0.2, 0.9];
        assert_eq!(MicPattern::Cardioid.gain(o, o.map(|v| -v)), 0.0);
        assert_eq!(MicPattern::Cardioid.gain(o, o.map(|v| 2.0 * v)), 1.0);
        assert_eq!(MicPattern::Omni.gain(o, o.map(|v| -v)), 1.0);
        let side = MicPattern::Cardioid.gain([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        assert!((side - 0.5).abs() < 1e-15);
    }

    #[test]
    fn coincident_source_and_mic_is_degenerate() {
        let cfg = omni_room([1.0, 1.0, 1.0], [1.0, 1.0, 1.0]);
        assert_eq!(image_source_rir(&cfg), Err(RoomError::Degenerate));
    }

    #[test]
    fn anechoic_limit_is_a_single_arrival() {
        let cfg = omni_room([1.0, 1.0, 1.0], [2.0, 1.5, 1.2]);
        let rir = image_source_rir_with_reflection(&cfg, 0.0, 4000).unwrap();
        let d = rir.direct_path_delay();
        let centre = d.round() as usize;
        let lo = centre.saturating_sub(SINC_TAPS / 2);
        let hi = centre + SINC_TAPS / 2;
        let outside: f64 = rir
            .taps()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i < lo || *i > hi)
            .map(|(_, t)| t * t)
            .sum();
        assert!(outside < 0.01 * rir.energy());
        let peak = rir
            .taps()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0;
        assert!((peak as f64 - d).abs() <= 1.0);
    }

    #[test]
    fn integer_delays_are_exact_impulses() {
        let mut taps = vec![0.0; 200];
        add_fractional_impulse(&mut taps, 100.0, 0.5, 40, ((PI / 41.0).sin(), (PI / 41.0).cos()));
        assert_eq!(taps[100], 0.5);
        assert_eq!(taps.iter().filter(|&&t| t != 0.0).count(), 1);
    }

    #[test]
    fn fractional_impulse_matches_direct_evaluation() {
        let mut taps = vec![0.0; 200];
        let tau = 87.37;
        add_fractional_impulse(&mut taps, tau, 1.0, 40, ((PI / 41.0).sin(), (PI / 41.0).cos()));
        for (n, &got) in taps.iter().enumerate() {
            let t = n as f64 - tau;
            let want = if t.abs() < 41.0 && (n as i64 - 87).abs() <= 40 {
                0.5 * (1.0 + (PI * t / 41.0).cos()) * (PI * t).sin() / (PI * t)
            } else {
                0.0
            };
            assert!((got - want).abs() < 1e-12, "tap {n}: {got} vs {want}");
        }
    }

    #[test]
    fn no_energy_before_the_direct_path() {
        let cfg = omni_room([1.0, 1.0, 1.0], [3.5, 2.5, 2.0]);
        let rir = image_source_rir(&cfg).unwrap();
        let first = (rir.direct_path_delay().floor() as usize) - SINC_TAPS / 2;
        assert!(first > 50);
        assert!(rir.taps()[..first].iter().all(|&t| t == 0.0));
    }

    #[test]
    fn playback_path_with_unit_and_delayed_impulse() {
        let r = AudioBuffer::new((0..500).map(|i| ((i * 37 % 101) as f64 - 50.0) / 60.0).collect()).unwrap();
        let n = apply_playback_path(&r, &ImpulseResponse::delayed_impulse(0, 1.0));
        assert_eq!(n.samples(), r.samples());
        let n = apply_playback_path_with_tail(&r, &ImpulseResponse::delayed_impulse(9, 0.5), 0);
        assert_eq!(n.len(), 500);
        assert!(n.samples()[..9].iter().all(|&s| s == 0.0));
        for i in 9..500 {
            assert_eq!(n.samples()[i], 0.5 * r.samples()[i - 9]);
        }
    }

    #[test]
    fn longer_t60_carries_more_tail_energy() {
        let mut cfg = sample_room_config(&mut rng_for(3, &[0]));
        let mut last = 0.0;
        for t60 in [0.2, 0.3, 0.45, 0.6] {
            cfg.t60 = t60;
            let rir = image_source_rir(&cfg).unwrap();
            let skip = rir.direct_path_delay().ceil() as usize + SINC_TAPS / 2 + 1;
            let tail: f64 = rir.taps()[skip..].iter().map(|t| t * t).sum();
            assert!(tail >= last);
            last = tail;
        }
    }
}
