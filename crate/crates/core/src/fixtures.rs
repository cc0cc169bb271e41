//! Synthetic stand-ins for the speech corpora: a formant-synthesised
//! keyword corpus laid out like Speech Commands, keyword-bearing TTS-like
//! interferer recordings and synthetic music.
//!
//! Everything is rendered from a seed, so fixtures are regenerated instead
//! of being stored.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{write_wav, AudioBuffer, DspError, SAMPLE_RATE};
use crate::seed::{derive_seed, rng_for};

const FS: f64 = SAMPLE_RATE as f64;
const CLIP_SAMPLES: usize = SAMPLE_RATE as usize;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("fixture config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Dsp(#[from] DspError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FixtureError + '_ {
    move |source| FixtureError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Speaker characteristics of the formant synthesiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Voice {
    /// Mean fundamental frequency in Hz.
    pub f0: f64,
    /// Multiplier on every formant frequency (vocal tract length).
    pub formant_scale: f64,
    /// Multiplier on segment durations.
    pub tempo: f64,
    /// Aspiration noise relative to the voiced source.
    pub breath: f64,
}

impl Voice {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let f0: f64 = rng.random_range(85.0..255.0);
        Self {
            f0,
            formant_scale: 0.9 + 0.22 * (f0 - 85.0) / 170.0 + rng.random_range(-0.05..0.05),
            tempo: rng.random_range(0.8..1.25),
            breath: rng.random_range(0.0..0.08),
        }
    }
}

type Formants = [f64; 3];

const I: Formants = [270.0, 2290.0, 3010.0];
const IH: Formants = [390.0, 1990.0, 2550.0];
const EH: Formants = [530.0, 1840.0, 2480.0];
const AE: Formants = [660.0, 1720.0, 2410.0];
const AA: Formants = [730.0, 1090.0, 2440.0];
const AO: Formants = [570.0, 840.0, 2410.0];
const UH: Formants = [440.0, 1020.0, 2240.0];
const UW: Formants = [300.0, 870.0, 2240.0];
const AH: Formants = [640.0, 1190.0, 2390.0];
const ER: Formants = [490.0, 1350.0, 1690.0];
const NASAL: Formants = [250.0, 1700.0, 2500.0];
const L: Formants = [360.0, 1300.0, 2700.0];

/// One articulatory segment. Durations are in seconds at tempo 1.
#[derive(Debug, Clone, Copy)]
enum Seg {
    /// Voiced, formants gliding from `.0` to `.1`.
    Voiced(Formants, Formants, f64, f64),
    /// Band noise: centre Hz, bandwidth Hz, gain, duration.
    Noise(f64, f64, f64, f64),
    /// Closure silence followed by a short burst at the given centre.
    Stop(f64),
}

use Seg::*;

fn vowel(f: Formants, dur: f64) -> Seg {
    Voiced(f, f, 1.0, dur)
}

fn glide(a: Formants, b: Formants, dur: f64) -> Seg {
    Voiced(a, b, 1.0, dur)
}

fn murmur(f: Formants, dur: f64) -> Seg {
    Voiced(f, f, 0.35, dur)
}

const S: Seg = Noise(5500.0, 2500.0, 0.5, 0.14);
const F: Seg = Noise(4000.0, 5000.0, 0.18, 0.12);

pub const KEYWORDS: [&str; 10] = ["yes", "no", "up", "down", "left", "right", "on", "off", "stop", "go"];

fn keyword_segments(word: usize) -> Vec<Seg> {
    match word {
        0 => vec![glide(I, EH, 0.22), S],
        1 => vec![murmur(NASAL, 0.07), glide(AO, UH, 0.26)],
        2 => vec![vowel(AH, 0.17), Stop(900.0)],
        3 => vec![Stop(3000.0), glide(AE, UH, 0.26), murmur(NASAL, 0.08)],
        4 => vec![murmur(L, 0.06), vowel(EH, 0.14), F, Stop(4000.0)],
        5 => vec![murmur(ER, 0.07), glide(AA, IH, 0.25), Stop(4000.0)],
        6 => vec![vowel(AA, 0.2), murmur(NASAL, 0.1)],
        7 => vec![vowel(AO, 0.2), F],
        8 => vec![S, Stop(4000.0), vowel(AA, 0.16), Stop(900.0)],
        9 => vec![Stop(2000.0), glide(AO, UW, 0.26)],
        _ => unreachable!("keyword index out of range"),
    }
}

/// A pronounceable non-keyword of one to three random syllables.
fn filler_segments<R: Rng + ?Sized>(rng: &mut R) -> Vec<Seg> {
    const VOWELS: [Formants; 10] = [I, IH, EH, AE, AA, AO, UH, UW, AH, ER];
    let mut segs = Vec::new();
    for _ in 0..rng.random_range(1..=3) {
        match rng.random_range(0..4) {
            0 => segs.push(murmur(NASAL, 0.06)),
            1 => segs.push(Stop(rng.random_range(800.0..4500.0))),
            2 => segs.push(Noise(rng.random_range(2500.0..6000.0), 2500.0, 0.3, 0.08)),
            _ => {}
        }
        let a = VOWELS[rng.random_range(0..VOWELS.len())];
        let b = VOWELS[rng.random_range(0..VOWELS.len())];
        segs.push(glide(a, b, rng.random_range(0.1..0.22)));
    }
    segs
}

/// Two-pole resonator with unit DC gain.
#[derive(Default, Clone, Copy)]
struct Resonator {
    a: f64,
    b: f64,
    c: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn tune(&mut self, freq: f64, bw: f64) {
        let freq = freq.min(0.45 * FS);
        let r = (-PI * bw / FS).exp();
        self.c = -r * r;
        self.b = 2.0 * r * (2.0 * PI * freq / FS).cos();
        self.a = 1.0 - self.b - self.c;
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.a * x + self.b * self.y1 + self.c * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Per-sample control tracks of an utterance.
struct Tracks {
    voice: Vec<f64>,
    formants: Vec<Formants>,
    noise: Vec<f64>,
    noise_band: Vec<(f64, f64)>,
}

fn control_tracks<R: Rng + ?Sized>(segs: &[Seg], voice: &Voice, rng: &mut R) -> Tracks {
    let mut t = Tracks {
        voice: Vec::new(),
        formants: Vec::new(),
        noise: Vec::new(),
        noise_band: Vec::new(),
    };
    let mut last_f = segs
        .iter()
        .find_map(|s| match s {
            Voiced(a, ..) => Some(*a),
            _ => None,
        })
        .unwrap_or(AH);
    let scale = |f: Formants, j: f64| f.map(|x| x * voice.formant_scale * j);
    for seg in segs {
        let jitter = rng.random_range(0.95..1.05);
        let stretch = voice.tempo * rng.random_range(0.9..1.1);
        let dur = |d: f64| (d * stretch * FS) as usize;
        match *seg {
            Voiced(a, b, gain, d) => {
                let n = dur(d);
                let (a, b) = (scale(a, jitter), scale(b, jitter));
                for i in 0..n {
                    let w = i as f64 / n.max(1) as f64;
                    t.voice.push(gain);
                    t.formants.push([0, 1, 2].map(|k| a[k] + w * (b[k] - a[k])));
                    t.noise.push(0.0);
                    t.noise_band.push((1000.0, 1000.0));
                }
                last_f = b;
            }
            Noise(centre, bw, gain, d) => {
                let n = dur(d);
                for _ in 0..n {
                    t.voice.push(0.0);
                    t.formants.push(last_f);
                    t.noise.push(gain);
                    t.noise_band.push((centre * voice.formant_scale * jitter, bw));
                }
            }
            Stop(centre) => {
                let closure = dur(0.045);
                let burst = dur(0.018);
                for i in 0..closure + burst {
                    t.voice.push(0.0);
                    t.formants.push(last_f);
                    t.noise.push(if i >= closure { 0.7 } else { 0.0 });
                    t.noise_band.push((centre * voice.formant_scale * jitter, 1500.0));
                }
            }
        }
    }
    // 8 ms attack/release smoothing on gains
    let alpha = (-1.0 / (0.008 * FS)).exp();
    for track in [&mut t.voice, &mut t.noise] {
        let mut s = 0.0;
        for v in track.iter_mut() {
            s = alpha * s + (1.0 - alpha) * *v;
            *v = s;
        }
    }
    t
}

/// Renders one utterance of the given segments, peak-normalised to 1.
fn render<R: Rng + ?Sized>(segs: &[Seg], voice: &Voice, rng: &mut R) -> Vec<f64> {
    let tracks = control_tracks(segs, voice, rng);
    let tail = (0.03 * FS) as usize;
    let n = tracks.voice.len() + tail;
    let mut out = vec![0.0; n];
    let mut formant_res = [Resonator::default(); 4];
    let mut noise_res = Resonator::default();
    let (mut lp1, mut lp2) = (0.0, 0.0);
    let mut phase = 0.0;
    let vibrato_rate = rng.random_range(4.0..6.0);
    let vibrato_phase = rng.random_range(0.0..2.0 * PI);
    for i in 0..n {
        let idx = i.min(tracks.voice.len() - 1);
        let in_tail = i >= tracks.voice.len();
        if i % 32 == 0 {
            let f = tracks.formants[idx];
            for (k, res) in formant_res.iter_mut().take(3).enumerate() {
                res.tune(f[k], [80.0, 110.0, 160.0][k]);
            }
            formant_res[3].tune(3500.0 * voice.formant_scale, 250.0);
            let (c, bw) = tracks.noise_band[idx];
            noise_res.tune(c, bw);
        }
        let pos = i as f64 / n as f64;
        let f0 = voice.f0
            * (1.08 - 0.16 * pos)
            * (1.0 + 0.01 * (2.0 * PI * vibrato_rate * i as f64 / FS + vibrato_phase).sin());
        phase += f0 / FS;
        let pulse = if phase >= 1.0 {
            phase -= 1.0;
            1.0
        } else {
            0.0
        };
        // glottal spectral tilt
        lp1 = 0.9 * lp1 + 0.1 * pulse;
        lp2 = 0.9 * lp2 + 0.1 * lp1;
        let aspiration: f64 = rng.sample::<f64, _>(StandardNormal) * voice.breath * 0.02;
        let (gv, gn) = if in_tail {
            (0.0, 0.0)
        } else {
            (tracks.voice[idx], tracks.noise[idx])
        };
        let mut v = (lp2 * 40.0 + aspiration) * gv;
        for res in formant_res.iter_mut() {
            v = res.step(v);
        }
        let white: f64 = rng.sample(StandardNormal);
        let fric = noise_res.step(white) * gn;
        out[i] = v + 0.6 * fric;
    }
    // formant cascade has a large DC gain; remove DC and normalise
    let mean = out.iter().sum::<f64>() / n as f64;
    let mut prev_x = 0.0;
    let mut prev_y = 0.0;
    for v in out.iter_mut() {
        let y = *v - mean - prev_x + 0.995 * prev_y;
        prev_x = *v - mean;
        prev_y = y;
        *v = y;
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v /= peak);
    }
    out
}

/// One keyword utterance embedded in a one-second clip with background noise.
pub fn keyword_clip<R: Rng + ?Sized>(word: usize, voice: &Voice, rng: &mut R) -> AudioBuffer {
    let speech = render(&keyword_segments(word), voice, rng);
    let speech = &speech[..speech.len().min(CLIP_SAMPLES - 800)];
    let level = rng.random_range(0.1..0.6);
    let start = rng.random_range(400..=CLIP_SAMPLES - speech.len() - 400);
    let snr_db: f64 = rng.random_range(25.0..45.0);
    let noise_level = level * 0.2 * 10f64.powf(-snr_db / 20.0);
    let mut x: Vec<f64> = (0..CLIP_SAMPLES)
        .map(|_| noise_level * rng.sample::<f64, _>(StandardNormal))
        .collect();
    for (dst, s) in x[start..].iter_mut().zip(speech) {
        *dst += level * s;
    }
    AudioBuffer::new(x).expect("finite synthesis")
}

/// Continuous read speech from one voice: words from the first `vocabulary`
/// keywords mixed with filler words and short pauses.
pub fn tts_recording<R: Rng + ?Sized>(
    voice: &Voice,
    seconds: f64,
    keyword_rate: f64,
    vocabulary: usize,
    rng: &mut R,
) -> AudioBuffer {
    let len = (seconds * FS) as usize;
    let mut x = vec![0.0; len];
    let mut pos = rng.random_range(0..(0.3 * FS) as usize);
    while pos < len {
        let segs = if rng.random_bool(keyword_rate) {
            keyword_segments(rng.random_range(0..vocabulary.clamp(1, KEYWORDS.len())))
        } else {
            filler_segments(rng)
        };
        let word = render(&segs, voice, rng);
        let gain = 0.35 * rng.random_range(0.85..1.0);
        for (dst, s) in x[pos..].iter_mut().zip(&word) {
            *dst += gain * s;
        }
        pos += word.len() + rng.random_range((0.04 * FS) as usize..(0.25 * FS) as usize);
    }
    AudioBuffer::new(x).expect("finite synthesis")
}

/// Chord progressions of decaying harmonic tones over a pulsed bass.
pub fn music_recording<R: Rng + ?Sized>(seconds: f64, rng: &mut R) -> AudioBuffer {
    let len = (seconds * FS) as usize;
    let mut x = vec![0.0; len];
    let root_midi = rng.random_range(45..57) as f64;
    let beat = rng.random_range(0.35..0.7);
    let beat_len = (beat * FS) as usize;
    let major = [0.0, 4.0, 7.0];
    let minor = [0.0, 3.0, 7.0];
    let degrees = [0.0, 5.0, 7.0, 9.0, 2.0];
    let mut start = 0;
    while start < len {
        let deg = degrees[rng.random_range(0..degrees.len())];
        let chord = if rng.random_bool(0.5) { major } else { minor };
        let dur = beat_len * rng.random_range(1..=4);
        for (k, iv) in chord.iter().enumerate() {
            let midi = root_midi + 12.0 + deg + iv;
            let f = 440.0 * 2f64.powf((midi - 69.0) / 12.0);
            let amp = 0.08 / (1.0 + k as f64 * 0.2);
            add_tone(&mut x, start, dur, f, amp, 2.5, 8);
        }
        let bass = 440.0 * 2f64.powf((root_midi + deg - 69.0) / 12.0);
        for b in (0..dur).step_by(beat_len) {
            add_tone(&mut x, start + b, beat_len, bass, 0.1, 6.0, 4);
        }
        start += dur;
    }
    AudioBuffer::new(x).expect("finite synthesis")
}

fn add_tone(x: &mut [f64], start: usize, dur: usize, freq: f64, amp: f64, decay: f64, harmonics: usize) {
    let end = (start + dur).min(x.len());
    for (i, v) in x[start.min(end)..end].iter_mut().enumerate() {
        let t = i as f64 / FS;
        let env = (-decay * t).exp() * (1.0 - (-t * 200.0).exp());
        let mut s = 0.0;
        for h in 1..=harmonics {
            let fh = freq * h as f64;
            if fh < 0.45 * FS {
                s += (2.0 * PI * fh * t).sin() / h as f64;
            }
        }
        *v += amp * env * s;
    }
}

/// Size and seed of a generated fixture set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixtureConfig {
    pub seed: u64,
    /// Number of keyword classes, taken from the front of [`KEYWORDS`].
    pub keywords: usize,
    pub train_speakers: usize,
    pub dev_speakers: usize,
    pub test_speakers: usize,
    /// Utterances per speaker and keyword.
    pub takes: usize,
    pub tts_clips: usize,
    pub music_clips: usize,
    pub interferer_seconds: f64,
    /// Fraction of TTS words drawn from the fixture keywords.
    pub tts_keyword_rate: f64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            keywords: 10,
            train_speakers: 40,
            dev_speakers: 6,
            test_speakers: 10,
            takes: 1,
            tts_clips: 10,
            music_clips: 10,
            interferer_seconds: 10.0,
            tts_keyword_rate: 0.6,
        }
    }
}

impl FixtureConfig {
    fn validate(&self) -> Result<(), FixtureError> {
        if self.keywords == 0 || self.keywords > KEYWORDS.len() {
            return Err(FixtureError::Config(format!(
                "keywords must be in 1..={}",
                KEYWORDS.len()
            )));
        }
        if self.train_speakers == 0 || self.takes == 0 {
            return Err(FixtureError::Config(
                "need at least one training speaker and take".into(),
            ));
        }
        if self.tts_clips == 0 || self.music_clips == 0 || !(self.interferer_seconds >= 1.0) {
            return Err(FixtureError::Config(
                "need interferer clips of at least one second".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.tts_keyword_rate) {
            return Err(FixtureError::Config("tts_keyword_rate must be a probability".into()));
        }
        Ok(())
    }
}

/// Locations of a generated fixture set.
#[derive(Debug, Clone, PartialEq)]
pub struct FixturePaths {
    pub keywords: PathBuf,
    pub tts: PathBuf,
    pub music: PathBuf,
}

impl FixturePaths {
    pub fn under(root: &Path) -> Self {
        Self {
            keywords: root.join("keywords"),
            tts: root.join("tts"),
            music: root.join("music"),
        }
    }
}

const STREAM_KEYWORD: u64 = 1;
const STREAM_SPEAKER: u64 = 2;
const STREAM_TTS: u64 = 3;
const STREAM_MUSIC: u64 = 4;
const STREAM_TTS_VOICE: u64 = 5;

/// Writes the keyword corpus, TTS and music recordings under `root`.
/// Speakers are assigned to splits in order: train, dev, test.
pub fn write_fixtures(root: &Path, cfg: &FixtureConfig) -> Result<FixturePaths, FixtureError> {
    cfg.validate()?;
    let paths = FixturePaths::under(root);
    for dir in [&paths.keywords, &paths.tts, &paths.music] {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let n_speakers = cfg.train_speakers + cfg.dev_speakers + cfg.test_speakers;
    let speaker_id = |s: usize| format!("{:08x}", derive_seed(cfg.seed, &[STREAM_SPEAKER, s as u64]) as u32);
    for word in &KEYWORDS[..cfg.keywords] {
        let dir = paths.keywords.join(word);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }

    let jobs: Vec<(usize, usize, usize)> = (0..n_speakers)
        .flat_map(|s| (0..cfg.keywords).flat_map(move |w| (0..cfg.takes).map(move |t| (s, w, t))))
        .collect();
    jobs.par_iter().try_for_each(|&(s, w, take)| {
        let voice = Voice::sample(&mut rng_for(cfg.seed, &[STREAM_SPEAKER, s as u64]));
        let mut rng = rng_for(cfg.seed, &[STREAM_KEYWORD, s as u64, w as u64, take as u64]);
        let clip = keyword_clip(w, &voice, &mut rng);
        let path = paths
            .keywords
            .join(KEYWORDS[w])
            .join(format!("{}_nohash_{take}.wav", speaker_id(s)));
        write_wav(&path, &clip).map_err(FixtureError::from)
    })?;

    let list = |range: std::ops::Range<usize>| {
        let mut lines = Vec::new();
        for w in &KEYWORDS[..cfg.keywords] {
            for s in range.clone() {
                for take in 0..cfg.takes {
                    lines.push(format!("{w}/{}_nohash_{take}.wav\n", speaker_id(s)));
                }
            }
        }
        lines.concat()
    };
    let dev = cfg.train_speakers..cfg.train_speakers + cfg.dev_speakers;
    let test = dev.end..n_speakers;
    for (name, range) in [("validation_list.txt", dev), ("testing_list.txt", test)] {
        let path = paths.keywords.join(name);
        fs::write(&path, list(range)).map_err(io_err(&path))?;
    }

    (0..cfg.tts_clips).into_par_iter().try_for_each(|i| {
        // a fresh talker per recording, drawn like the keyword speakers
        let voice = Voice::sample(&mut rng_for(cfg.seed, &[STREAM_TTS_VOICE, i as u64]));
        let mut rng = rng_for(cfg.seed, &[STREAM_TTS, i as u64]);
        let audio = tts_recording(
            &voice,
            cfg.interferer_seconds,
            cfg.tts_keyword_rate,
            cfg.keywords,
            &mut rng,
        );
        write_wav(paths.tts.join(format!("tts_{i:03}.wav")), &audio).map_err(FixtureError::from)
    })?;
    (0..cfg.music_clips).into_par_iter().try_for_each(|i| {
        let mut rng = rng_for(cfg.seed, &[STREAM_MUSIC, i as u64]);
        let audio = music_recording(cfg.interferer_seconds, &mut rng);
        write_wav(paths.music.join(format!("music_{i:03}.wav")), &audio).map_err(FixtureError::from)
    })?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{lfbe, read_wav};
    use crate::mixer::{GscCorpus, Split};

    #[test]
    fn clips_are_one_second_and_bounded() {
        let mut rng = rng_for(1, &[]);
        for w in 0..KEYWORDS.len() {
            let voice = Voice::sample(&mut rng);
            let clip = keyword_clip(w, &voice, &mut rng);
            assert_eq!(clip.len(), 16000);
            assert!(clip.samples().iter().all(|v| v.abs() < 1.0));
            assert!(clip.energy() > 0.0);
            assert_eq!(lfbe(&clip).unwrap().n_frames(), 98);
        }
    }

    #[test]
    fn same_seed_same_audio() {
        let v = Voice::sample(&mut rng_for(2, &[]));
        let a = keyword_clip(3, &v, &mut rng_for(3, &[]));
        let b = keyword_clip(3, &v, &mut rng_for(3, &[]));
        assert_eq!(a, b);
        let c = keyword_clip(3, &v, &mut rng_for(4, &[]));
        assert_ne!(a, c);
    }

    #[test]
    fn keywords_differ_in_spectrum() {
        // mean LFBE profiles of two words from one speaker should not coincide
        let v = Voice::sample(&mut rng_for(0, &[]));
        let profile = |w| {
            let f = lfbe(&keyword_clip(w, &v, &mut rng_for(5, &[w as u64]))).unwrap();
            let x = f.values();
            x.mean_axis(ndarray::Axis(0)).unwrap()
        };
        let a = profile(0);
        let b = profile(6);
        let d = (&a - &b).mapv(f64::abs).mean().unwrap();
        assert!(d > 0.5, "{d}");
    }

    #[test]
    fn fixture_tree_scans_as_keyword_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = FixtureConfig {
            keywords: 3,
            train_speakers: 3,
            dev_speakers: 1,
            test_speakers: 2,
            tts_clips: 2,
            music_clips: 1,
            interferer_seconds: 2.0,
            ..FixtureConfig::default()
        };
        let paths = write_fixtures(dir.path(), &cfg).unwrap();
        let corpus = GscCorpus::scan(&paths.keywords, &[]).unwrap();
        assert_eq!(corpus.classes, vec!["no", "up", "yes"]);
        let counts = corpus.split_counts();
        assert_eq!(counts[&("yes".to_string(), Split::Train)], 3);
        assert_eq!(counts[&("yes".to_string(), Split::Dev)], 1);
        assert_eq!(counts[&("no".to_string(), Split::Test)], 2);
        let tts = read_wav(paths.tts.join("tts_001.wav")).unwrap();
        assert_eq!(tts.len(), 32000);
        assert!(tts.samples().iter().all(|v| v.abs() < 1.0));
        assert!(read_wav(paths.music.join("music_000.wav")).unwrap().energy() > 0.0);
    }

    #[test]
    fn rejects_bad_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = FixtureConfig {
            keywords: 11,
            ..FixtureConfig::default()
        };
        assert!(matches!(write_fixtures(dir.path(), &cfg), Err(FixtureError::Config(_))));
    }
}
