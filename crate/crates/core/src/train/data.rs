use std::sync::Arc;

use ndarray::{concatenate, Array2, Axis};
use rand::Rng;
use rayon::prelude::*;

use super::{Strategy, TrainConfig, TrainError};
use crate::dsp::{
    dequantize_i16, quantize_i16, read_wav, AudioBuffer, DspError, FeatureSequence, Lfbe, Spectrogram, Stft,
    WindowKind, LFBE_HOP, LFBE_WINDOW,
};
use crate::eval::{load_examples, EvalExample};
use crate::mixer::{Condition, Manifest, Split, TripletSampler};
use crate::nnet::Batch;

/// 16-bit PCM held in memory and decoded on use.
#[derive(Debug, Clone, PartialEq)]
pub struct Pcm(Arc<[i16]>);

impl Pcm {
    pub fn from_audio(audio: &AudioBuffer) -> Self {
        Self(audio.samples().iter().map(|&x| quantize_i16(x)).collect())
    }

    pub fn to_audio(&self) -> AudioBuffer {
        AudioBuffer::new(self.0.iter().map(|&s| dequantize_i16(s)).collect()).expect("pcm is finite")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A clean labelled clip, the target of non-playback and augmented draws.
#[derive(Debug, Clone)]
pub struct TrainClip {
    pub label: usize,
    pub audio: Pcm,
}

/// A pre-synthesised playback mixture with its reference.
#[derive(Debug, Clone)]
pub struct PlaybackPair {
    pub label: usize,
    pub condition: Condition,
    pub mixture: Pcm,
    pub reference: Pcm,
}

#[derive(Debug, Clone, Default)]
pub struct TrainData {
    pub clips: Vec<TrainClip>,
    pub playback: Vec<PlaybackPair>,
}

impl TrainData {
    /// Non-playback entries of `split` become clean clips, playback entries
    /// become oracle pairs.
    pub fn from_manifest(manifest: &Manifest, split: Split) -> Result<Self, TrainError> {
        let entries: Vec<_> = manifest.entries.iter().filter(|e| e.split == split).collect();
        let loaded: Vec<Result<(Option<TrainClip>, Option<PlaybackPair>), TrainError>> = entries
            .par_iter()
            .map(|e| {
                let mixture = Pcm::from_audio(&read_wav(&e.mixture_path)?);
                if !e.condition.is_playback() {
                    return Ok((
                        Some(TrainClip {
                            label: e.label,
                            audio: mixture,
                        }),
                        None,
                    ));
                }
                let path = e.reference_path.as_ref().ok_or_else(|| {
                    TrainError::Config(format!(
                        "{}: playback entry without reference",
                        e.mixture_path.display()
                    ))
                })?;
                Ok((
                    None,
                    Some(PlaybackPair {
                        label: e.label,
                        condition: e.condition,
                        mixture,
                        reference: Pcm::from_audio(&read_wav(path)?),
                    }),
                ))
            })
            .collect();
        let mut data = TrainData::default();
        for r in loaded {
            let (c, p) = r?;
            data.clips.extend(c);
            data.playback.extend(p);
        }
        Ok(data)
    }
}

/// Training and model-selection data.
#[derive(Debug, Clone)]
pub struct DataSources {
    pub train: TrainData,
    pub dev: Vec<EvalExample>,
}

impl DataSources {
    pub fn from_manifest(manifest: &Manifest) -> Result<Self, TrainError> {
        Ok(Self {
            train: TrainData::from_manifest(manifest, Split::Train)?,
            dev: load_examples(manifest, Split::Dev)?,
        })
    }
}

/// Where a playback example comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaybackSource {
    Oracle,
    Augmented,
}

/// Playback source of one draw, or `None` for a clean example. The first
/// draw decides playback; under `Both` a second fair coin picks the source.
pub fn choose_source<R: Rng + ?Sized>(strategy: Strategy, playback_prob: f64, rng: &mut R) -> Option<PlaybackSource> {
    if strategy == Strategy::Off || !rng.random_bool(playback_prob) {
        return None;
    }
    Some(match strategy {
        Strategy::Orcl => PlaybackSource::Oracle,
        Strategy::Augm => PlaybackSource::Augmented,
        Strategy::Both if rng.random_bool(0.5) => PlaybackSource::Oracle,
        _ => PlaybackSource::Augmented,
    })
}

/// One model input before batching.
#[derive(Debug, Clone)]
pub struct Example {
    pub mixture: FeatureSequence,
    pub reference: Option<FeatureSequence>,
    pub label: usize,
    pub mask_y: Option<Array2<f64>>,
    pub mask_r: Option<Array2<f64>>,
}

pub(crate) struct Featurizer {
    stft: Stft,
    lfbe: Lfbe,
}

impl Featurizer {
    pub(crate) fn new() -> Self {
        Self {
            stft: Stft::new(LFBE_WINDOW, LFBE_HOP, WindowKind::Hann).expect("lfbe framing is valid"),
            lfbe: Lfbe::new(),
        }
    }

    fn spectrogram(&self, pcm: &Pcm) -> Result<Spectrogram, DspError> {
        self.stft.forward(&pcm.to_audio())
    }

    fn features(&self, pcm: &Pcm) -> Result<FeatureSequence, TrainError> {
        Ok(self.lfbe.extract(&pcm.to_audio())?)
    }

    /// Draws training example `index` of an epoch. Draw order: playback
    /// source, example content, crop, then SpecAugment masks.
    pub(crate) fn draw<R: Rng + ?Sized>(
        &self,
        data: &TrainData,
        index: usize,
        cfg: &TrainConfig,
        n_features: usize,
        rng: &mut R,
    ) -> Result<Example, TrainError> {
        let clip = &data.clips[index];
        let (mixture, reference, label) = match choose_source(cfg.augmentation, cfg.playback_prob, rng) {
            None => (self.features(&clip.audio)?, None, clip.label),
            Some(PlaybackSource::Oracle) => {
                if data.playback.is_empty() {
                    return Err(TrainError::EmptyData("oracle playback pairs"));
                }
                let pair = &data.playback[rng.random_range(0..data.playback.len())];
                (
                    self.features(&pair.mixture)?,
                    Some(self.features(&pair.reference)?),
                    pair.label,
                )
            }
            Some(PlaybackSource::Augmented) => {
                let sampler = TripletSampler {
                    config: cfg.augment,
                    ..TripletSampler::default()
                };
                let t = sampler.sample(data.clips.len(), Some(index), rng, |i| {
                    Ok((self.spectrogram(&data.clips[i].audio)?, data.clips[i].label))
                })?;
                (
                    self.lfbe.from_spectrogram(&t.mixture)?,
                    Some(self.lfbe.from_spectrogram(&t.reference)?),
                    t.label,
                )
            }
        };
        let seg = cfg.segment_frames;
        let frames = mixture.n_frames();
        let start = if frames > seg {
            rng.random_range(0..=frames - seg)
        } else {
            0
        };
        let crop = |x: &FeatureSequence| x.window(start, seg);
        let mixture = crop(&mixture);
        let reference = reference.as_ref().map(crop);
        let augmenting = cfg.spec_augment != crate::nnet::SpecAugmentPolicy::off();
        let mask_y = augmenting.then(|| cfg.spec_augment.draw_mask(seg, n_features, rng));
        let mask_r = (augmenting && reference.is_some()).then(|| cfg.spec_augment.draw_mask(seg, n_features, rng));
        Ok(Example {
            mixture,
            reference,
            label,
            mask_y,
            mask_r,
        })
    }
}

/// Stacks equal-length examples into a model batch.
pub fn collate(examples: &[Example]) -> Result<(Batch, Vec<usize>), TrainError> {
    let ys: Vec<&FeatureSequence> = examples.iter().map(|e| &e.mixture).collect();
    let rs: Vec<Option<&FeatureSequence>> = examples.iter().map(|e| e.reference.as_ref()).collect();
    let mut batch = Batch::from_sequences(&ys, &rs)?;
    let frames = batch.frames;
    let width = batch.x_y.ncols();
    if examples.iter().any(|e| e.mask_y.is_some()) {
        let ones = Array2::ones((frames, width));
        let views: Vec<_> = examples
            .iter()
            .map(|e| e.mask_y.as_ref().unwrap_or(&ones).view())
            .collect();
        batch.mask_y = Some(concatenate(Axis(0), &views).expect("equal mask widths"));
        if batch.x_r.is_some() {
            let views: Vec<_> = examples
                .iter()
                .map(|e| e.mask_r.as_ref().unwrap_or(&ones).view())
                .collect();
            batch.mask_r = Some(concatenate(Axis(0), &views).expect("equal mask widths"));
        }
    }
    Ok((batch, examples.iter().map(|e| e.label).collect()))
}
