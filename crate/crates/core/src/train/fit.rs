use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::data::{collate, DataSources, Example, Featurizer};
use super::{adam_step, batch_cross_entropy, AdamState, DevMetric, Strategy, TrainConfig, TrainError};
use crate::eval::{accuracy, frr_at_far, score_examples, EvalExample};
use crate::nnet::{Checkpoint, TcnConfig, TcnModel};
use crate::seed::{derive_seed, rng_for};

/// Column names of the training log; one tab-separated row per epoch follows.
pub const LOG_HEADER: &str = "epoch\ttrain_loss\ttrain_accuracy\tdev_metric\twall_seconds";

const STREAM_INIT: u64 = 0x11;
const STREAM_SHUFFLE: u64 = 0x12;
const STREAM_EXAMPLE: u64 = 0x13;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub dev_metric: f64,
    pub wall_seconds: f64,
}

impl EpochRecord {
    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.3}",
            self.epoch, self.train_loss, self.train_accuracy, self.dev_metric, self.wall_seconds
        )
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    /// Parameters of the epoch with the best dev metric.
    pub best: Checkpoint,
    pub history: Vec<EpochRecord>,
    pub stopped_early: bool,
}

/// Trains a freshly initialised model; the initialisation seed is derived
/// from `cfg.seed`.
pub fn fit(
    model_cfg: &TcnConfig,
    cfg: &TrainConfig,
    data: &DataSources,
    log: Option<&mut dyn Write>,
) -> Result<FitReport, TrainError> {
    let model = TcnModel::new(model_cfg.clone(), derive_seed(cfg.seed, &[STREAM_INIT]))?;
    fit_model(model, cfg, data, log)
}

/// Trains `model` in place from its current parameters.
pub fn fit_model(
    mut model: TcnModel,
    cfg: &TrainConfig,
    data: &DataSources,
    mut log: Option<&mut dyn Write>,
) -> Result<FitReport, TrainError> {
    cfg.validate(model.config())?;
    let clips = &data.train.clips;
    if clips.is_empty() {
        return Err(TrainError::EmptyData("training clip list"));
    }
    if data.dev.is_empty() {
        return Err(TrainError::EmptyData("dev set"));
    }
    if matches!(cfg.augmentation, Strategy::Augm | Strategy::Both) && clips.len() < 2 {
        return Err(TrainError::Config("on-the-fly mixing needs at least two clips".into()));
    }
    let featurizer = Featurizer::new();
    let n_features = model.config().in_features;
    let adam_cfg = cfg.adam();
    let mut adam = AdamState::new(model.params());
    if let Some(w) = log.as_deref_mut() {
        writeln!(w, "{LOG_HEADER}")?;
    }

    let mut history = Vec::new();
    let mut best: Option<(usize, f64, TcnModel)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;
    for epoch in 0..cfg.max_epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..clips.len()).collect();
        order.shuffle(&mut rng_for(cfg.seed, &[STREAM_SHUFFLE, epoch as u64]));
        let (mut loss_sum, mut hits) = (0.0, 0usize);
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let base = step * cfg.batch_size;
            let examples: Vec<Example> = chunk
                .par_iter()
                .enumerate()
                .map(|(j, &k)| {
                    let mut rng = rng_for(cfg.seed, &[STREAM_EXAMPLE, epoch as u64, (base + j) as u64]);
                    featurizer.draw(&data.train, k, cfg, n_features, &mut rng)
                })
                .collect::<Result<_, _>>()?;
            let (batch, labels) = collate(&examples)?;
            let (out, cache) = model.forward(&batch, true)?;
            let (loss, d_pooled) = batch_cross_entropy(&out.pooled, &labels);
            if !loss.is_finite() {
                return Err(TrainError::NonFinite { epoch, step, loss });
            }
            let grads = model.backward(&cache, &d_pooled);
            adam_step(model.params_mut(), &grads, &mut adam, &adam_cfg);
            model.update_bn_stats(&cache);
            loss_sum += loss * labels.len() as f64;
            hits += labels
                .iter()
                .enumerate()
                .filter(|(i, &l)| predicted_class(out.pooled.row(*i).as_slice().unwrap()) == l)
                .count();
        }
        let dev_metric = dev_score(&model, &data.dev, cfg)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / clips.len() as f64,
            train_accuracy: hits as f64 / clips.len() as f64,
            dev_metric,
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        if let Some(w) = log.as_deref_mut() {
            writeln!(w, "{}", record.to_tsv())?;
            w.flush()?;
        }
        history.push(record);
        let improved = match &best {
            None => true,
            Some((_, m, _)) => cfg.dev_metric.better(dev_metric, *m),
        };
        if improved {
            best = Some((epoch, dev_metric, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.early_stop_patience {
                stopped_early = true;
                break;
            }
        }
    }
    let (epoch, dev_metric, model) = best.ok_or_else(|| TrainError::Config("max_epochs must be positive".into()))?;
    Ok(FitReport {
        best: Checkpoint {
            model,
            epoch,
            dev_metric,
            seed: cfg.seed,
        },
        history,
        stopped_early,
    })
}

/// Argmax for class logits; sign for a single logit.
fn predicted_class(logits: &[f64]) -> usize {
    if logits.len() == 1 {
        return usize::from(logits[0] > 0.0);
    }
    let mut best = 0;
    for (i, v) in logits.iter().enumerate() {
        if *v > logits[best] {
            best = i;
        }
    }
    best
}

/// Dev-set metric of `model` in eval mode.
pub(crate) fn dev_score(model: &TcnModel, dev: &[EvalExample], cfg: &TrainConfig) -> Result<f64, TrainError> {
    let scored = score_examples(model, dev, cfg.batch_size)?;
    Ok(match cfg.dev_metric {
        DevMetric::Accuracy => {
            let preds: Vec<usize> = scored.iter().map(|s| predicted_class(&s.scores)).collect();
            let labels: Vec<usize> = scored.iter().map(|s| s.label).collect();
            accuracy(&preds, &labels)?
        }
        DevMetric::FrrAtFar(target) => {
            let scores: Vec<f64> = scored.iter().map(|s| s.scores[0]).collect();
            let positives: Vec<bool> = scored.iter().map(|s| s.label > 0).collect();
            frr_at_far(&scores, &positives, target)?.frr
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{lfbe, AudioBuffer};
    use crate::mixer::Condition;
    use crate::nnet::SpecAugmentPolicy;
    use crate::train::{Pcm, TrainClip, TrainData};
    use rand::Rng;

    fn small_model() -> TcnConfig {
        TcnConfig {
            bottleneck_d: 8,
            hidden_h: 12,
            n_classes: 3,
            ..TcnConfig::default()
        }
    }

    /// Noisy tones whose pitch encodes the label.
    fn clip(label: usize, seed: u64) -> AudioBuffer {
        let mut rng = rng_for(seed, &[]);
        let f = 300.0 * (label + 1) as f64 * rng.random_range(0.95..1.05);
        let x = (0..16000)
            .map(|i| 0.2 * (i as f64 * f * std::f64::consts::TAU / 16000.0).sin() + rng.random_range(-0.02..0.02))
            .collect();
        AudioBuffer::new(x).unwrap()
    }

    fn sources(n: usize) -> DataSources {
        let clips = (0..n)
            .map(|i| TrainClip {
                label: i % 3,
                audio: Pcm::from_audio(&clip(i % 3, i as u64)),
            })
            .collect();
        let dev = (0..9)
            .map(|i| EvalExample {
                mixture: lfbe(&clip(i % 3, 1000 + i as u64)).unwrap(),
                reference: None,
                label: i % 3,
                condition: Condition::NonPlayback,
            })
            .collect();
        DataSources {
            train: TrainData {
                clips,
                playback: vec![],
            },
            dev,
        }
    }

    fn quick(seed: u64) -> TrainConfig {
        TrainConfig {
            max_epochs: 4,
            early_stop_patience: 3,
            batch_size: 8,
            augmentation: Strategy::Off,
            spec_augment: SpecAugmentPolicy::off(),
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn loss_on_a_fixed_batch_decreases_for_five_steps() {
        let data = sources(16);
        let cfg = quick(5);
        let mut model = TcnModel::new(small_model(), 1).unwrap();
        let f = Featurizer::new();
        let examples: Vec<Example> = (0..16)
            .map(|k| f.draw(&data.train, k, &cfg, 64, &mut rng_for(5, &[k as u64])).unwrap())
            .collect();
        let (batch, labels) = collate(&examples).unwrap();
        let mut adam = AdamState::new(model.params());
        let mut last = f64::INFINITY;
        for _ in 0..5 {
            let (out, cache) = model.forward(&batch, true).unwrap();
            let (loss, d) = batch_cross_entropy(&out.pooled, &labels);
            assert!(loss < last, "{loss} after {last}");
            last = loss;
            let g = model.backward(&cache, &d);
            adam_step(model.params_mut(), &g, &mut adam, &cfg.adam());
        }
    }

    #[test]
    fn zero_patience_stops_at_the_first_non_improving_epoch() {
        let data = sources(12);
        let cfg = TrainConfig {
            max_epochs: 6,
            early_stop_patience: 0,
            lr: 1e-9,
            ..quick(2)
        };
        let r = fit(&small_model(), &cfg, &data, None).unwrap();
        let h = &r.history;
        // with a negligible step size the dev accuracy cannot move
        assert_eq!(h.len(), 2);
        assert!(r.stopped_early);
        assert_eq!(r.best.epoch, 0);
    }

    #[test]
    fn best_checkpoint_is_never_worse_than_any_epoch() {
        let data = sources(24);
        let cfg = TrainConfig {
            max_epochs: 6,
            early_stop_patience: 1,
            lr: 3e-3,
            ..quick(3)
        };
        let r = fit(&small_model(), &cfg, &data, None).unwrap();
        for e in &r.history {
            assert!(e.dev_metric <= r.best.dev_metric);
        }
        assert_eq!(r.history[r.best.epoch].dev_metric, r.best.dev_metric);
        // the returned model reproduces its recorded metric in eval mode
        assert_eq!(dev_score(&r.best.model, &data.dev, &cfg).unwrap(), r.best.dev_metric);
        if r.stopped_early {
            let tail = &r.history[r.best.epoch + 1..];
            assert_eq!(tail.len(), cfg.early_stop_patience.max(1));
        }
    }

    #[test]
    fn identical_seeds_give_identical_checkpoints() {
        let data = sources(12);
        let cfg = TrainConfig {
            augmentation: Strategy::Augm,
            spec_augment: SpecAugmentPolicy::default(),
            ..quick(4)
        };
        let a = fit(&small_model(), &cfg, &data, None).unwrap();
        let b = fit(&small_model(), &cfg, &data, None).unwrap();
        assert_eq!(a.best.model.params(), b.best.model.params());
        assert_eq!(a.best.epoch, b.best.epoch);
        let losses = |r: &FitReport| r.history.iter().map(|e| e.train_loss.to_bits()).collect::<Vec<_>>();
        assert_eq!(losses(&a), losses(&b));
        let c = fit(&small_model(), &TrainConfig { seed: 5, ..cfg }, &data, None).unwrap();
        assert_ne!(a.best.model.params(), c.best.model.params());
    }

    #[test]
    fn diverging_loss_aborts_with_a_diagnostic() {
        let data = sources(12);
        let cfg = TrainConfig { lr: 1e300, ..quick(1) };
        match fit(&small_model(), &cfg, &data, None) {
            Err(TrainError::NonFinite { epoch, loss, .. }) => {
                assert_eq!(epoch, 0);
                assert!(!loss.is_finite());
            }
            other => panic!("expected a non-finite abort, got {other:?}"),
        }
    }

    #[test]
    fn log_has_a_header_and_one_row_per_epoch() {
        let data = sources(8);
        let cfg = TrainConfig {
            max_epochs: 2,
            early_stop_patience: 1,
            ..quick(0)
        };
        let mut buf = Vec::new();
        let r = fit(&small_model(), &cfg, &data, Some(&mut buf)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], LOG_HEADER);
        assert_eq!(lines.len(), r.history.len() + 1);
        for (line, rec) in lines[1..].iter().zip(&r.history) {
            let cols: Vec<&str> = line.split('\t').collect();
            assert_eq!(cols.len(), 5);
            assert_eq!(cols[0].parse::<usize>().unwrap(), rec.epoch);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let data = sources(4);
        let m = small_model();
        let bad = [
            TrainConfig {
                early_stop_patience: 4,
                ..quick(0)
            },
            TrainConfig {
                segment_frames: 98,
                ..quick(0)
            },
            TrainConfig {
                batch_size: 0,
                ..quick(0)
            },
            TrainConfig {
                playback_prob: 1.5,
                ..quick(0)
            },
            TrainConfig {
                dev_metric: DevMetric::FrrAtFar(0.01),
                ..quick(0)
            },
        ];
        for cfg in bad {
            assert!(
                matches!(fit(&m, &cfg, &data, None), Err(TrainError::Config(_))),
                "{cfg:?}"
            );
        }
        let empty = DataSources {
            train: TrainData::default(),
            dev: data.dev.clone(),
        };
        assert!(matches!(
            fit(&m, &quick(0), &empty, None),
            Err(TrainError::EmptyData(_))
        ));
    }
}
