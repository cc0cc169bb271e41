//! Accuracy, FRR/FAR operating points and per-condition reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{read_wav, FeatureSequence, Lfbe};
use crate::mixer::{Condition, Manifest, MixError, Split};
use crate::nnet::{count_cost, Batch, NnetError, TcnConfig, TcnModel};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no examples to evaluate")]
    Empty,
    #[error("{0} predictions for {1} labels")]
    LengthMismatch(usize, usize),
    #[error("operating point needs both positive and negative examples")]
    SingleClass,
    #[error("target FAR {0} outside (0, 1)")]
    BadTarget(f64),
    #[error("non-finite score at index {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Nnet(#[from] NnetError),
    #[error(transparent)]
    Mix(#[from] MixError),
}

/// Model output for one test utterance: class logits, or a single logit
/// for binary detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredUtterance {
    pub scores: Vec<f64>,
    pub label: usize,
    pub condition: Condition,
}

impl ScoredUtterance {
    /// Index of the largest score (first on ties).
    pub fn predicted(&self) -> usize {
        let mut best = 0;
        for (i, s) in self.scores.iter().enumerate() {
            if *s > self.scores[best] {
                best = i;
            }
        }
        best
    }
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch(predictions.len(), labels.len()));
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Counts indexed `[label, prediction]`.
pub fn confusion_matrix(predictions: &[usize], labels: &[usize], n_classes: usize) -> Array2<usize> {
    let mut m = Array2::zeros((n_classes, n_classes));
    for (&p, &l) in predictions.iter().zip(labels) {
        m[[l, p]] += 1;
    }
    m
}

/// Error rates when scores at or above `threshold` are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

fn check_binary(scores: &[f64], positives: &[bool]) -> Result<(usize, usize), EvalError> {
    if scores.len() != positives.len() {
        return Err(EvalError::LengthMismatch(scores.len(), positives.len()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFinite(i));
    }
    let n_pos = positives.iter().filter(|p| **p).count();
    let n_neg = positives.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    Ok((n_pos, n_neg))
}

/// Stepwise DET curve over every observed score plus both infinities, in
/// increasing threshold order.
pub fn det_curve(scores: &[f64], positives: &[bool]) -> Result<Vec<OperatingPoint>, EvalError> {
    let (n_pos, n_neg) = check_binary(scores, positives)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sweeping upwards, everything strictly below the threshold is rejected
    let mut points = vec![OperatingPoint {
        threshold: f64::NEG_INFINITY,
        far: 1.0,
        frr: 0.0,
    }];
    let (mut rejected_pos, mut rejected_neg) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        points.push(OperatingPoint {
            threshold: s,
            far: (n_neg - rejected_neg) as f64 / n_neg as f64,
            frr: rejected_pos as f64 / n_pos as f64,
        });
        while i < order.len() && scores[order[i]] == s {
            if positives[order[i]] {
                rejected_pos += 1;
            } else {
                rejected_neg += 1;
            }
            i += 1;
        }
    }
    points.push(OperatingPoint {
        threshold: f64::INFINITY,
        far: 0.0,
        frr: 1.0,
    });
    Ok(points)
}

/// FRR at the largest achievable FAR not above `target_far`. The threshold
/// sits on the score of the lowest accepted negative, or just above the
/// highest negative when none can be accepted.
pub fn frr_at_far(scores: &[f64], positives: &[bool], target_far: f64) -> Result<OperatingPoint, EvalError> {
    if !(target_far > 0.0 && target_far < 1.0) {
        return Err(EvalError::BadTarget(target_far));
    }
    let (n_pos, n_neg) = check_binary(scores, positives)?;
    let mut neg: Vec<f64> = scores
        .iter()
        .zip(positives)
        .filter(|(_, p)| !**p)
        .map(|(s, _)| *s)
        .collect();
    neg.sort_by(|a, b| b.total_cmp(a));
    let frr_at = |t: f64| scores.iter().zip(positives).filter(|(s, p)| **p && **s < t).count() as f64 / n_pos as f64;
    let top = neg[0].next_up();
    let mut point = OperatingPoint {
        threshold: top,
        far: 0.0,
        frr: frr_at(top),
    };
    let mut k = 0;
    while k < n_neg {
        let t = neg[k];
        while k < n_neg && neg[k] == t {
            k += 1;
        }
        let far = k as f64 / n_neg as f64;
        if far > target_far {
            break;
        }
        point = OperatingPoint {
            threshold: t,
            far,
            frr: frr_at(t),
        };
    }
    Ok(point)
}

/// One labelled utterance with its features and, for playback conditions,
/// the reference features.
#[derive(Debug, Clone)]
pub struct EvalExample {
    pub mixture: FeatureSequence,
    pub reference: Option<FeatureSequence>,
    pub label: usize,
    pub condition: Condition,
}

/// Loads the LFBE features of every manifest entry in `split`.
pub fn load_examples(manifest: &Manifest, split: Split) -> Result<Vec<EvalExample>, EvalError> {
    use rayon::prelude::*;
    let lfbe = Lfbe::new();
    let entries: Vec<_> = manifest.entries.iter().filter(|e| e.split == split).collect();
    entries
        .par_iter()
        .map(|e| {
            let feats = |p: &Path| -> Result<FeatureSequence, EvalError> {
                let audio = read_wav(p).map_err(MixError::from)?;
                Ok(lfbe.extract(&audio).map_err(MixError::from)?)
            };
            let reference = match (&e.reference_path, e.condition.is_playback()) {
                (Some(p), true) => Some(feats(p)?),
                _ => None,
            };
            Ok(EvalExample {
                mixture: feats(&e.mixture_path)?,
                reference,
                label: e.label,
                condition: e.condition,
            })
        })
        .collect()
}

/// Eval-mode scores of `examples`, batched by padded length. Inputs shorter
/// than the receptive field are zero-padded at the tail and longer ones are
/// max-pooled over time.
pub fn score_examples(
    model: &TcnModel,
    examples: &[EvalExample],
    batch_size: usize,
) -> Result<Vec<ScoredUtterance>, EvalError> {
    let min_frames = model.segment_frames();
    let mut by_len: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, ex) in examples.iter().enumerate() {
        by_len.entry(ex.mixture.n_frames().max(min_frames)).or_default().push(i);
    }
    let mut out: Vec<Option<ScoredUtterance>> = vec![None; examples.len()];
    for (frames, idx) in by_len {
        for chunk in idx.chunks(batch_size.max(1)) {
            let ys: Vec<FeatureSequence> = chunk.iter().map(|&i| examples[i].mixture.pad_to(frames)).collect();
            let rs: Vec<Option<FeatureSequence>> = chunk
                .iter()
                .map(|&i| examples[i].reference.as_ref().map(|r| r.window(0, frames)))
                .collect();
            let y_refs: Vec<&FeatureSequence> = ys.iter().collect();
            let r_refs: Vec<Option<&FeatureSequence>> = rs.iter().map(|r| r.as_ref()).collect();
            let batch = Batch::from_sequences(&y_refs, &r_refs)?;
            let (fwd, _) = model.forward(&batch, false)?;
            for (row, &i) in chunk.iter().enumerate() {
                out[i] = Some(ScoredUtterance {
                    scores: fwd.pooled.row(row).to_vec(),
                    label: examples[i].label,
                    condition: examples[i].condition,
                });
            }
        }
    }
    Ok(out.into_iter().map(|s| s.expect("every example scored")).collect())
}

/// One FRR operating point of a report row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrrPoint {
    pub target_far: f64,
    pub far: f64,
    pub frr: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub condition: Condition,
    pub count: usize,
    /// Multi-class accuracy; `None` for single-logit models.
    pub accuracy: Option<f64>,
    pub frr: Vec<FrrPoint>,
    pub params: Option<usize>,
    pub flops: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub rows: Vec<ConditionRow>,
}

/// Groups scored utterances by condition. Multi-class scores give an
/// accuracy column; single-logit scores (label 1 = positive, sigmoid
/// scores) give one FRR column per target FAR. With a model config, the
/// cost of that condition's inference mode is attached.
pub fn report_by_condition(
    scored: &[ScoredUtterance],
    target_fars: &[f64],
    model: Option<&TcnConfig>,
) -> Result<ConditionReport, EvalError> {
    let mut groups: BTreeMap<Condition, Vec<&ScoredUtterance>> = BTreeMap::new();
    for s in scored {
        groups.entry(s.condition).or_default().push(s);
    }
    let mut rows = Vec::new();
    for (condition, items) in groups {
        let binary = items[0].scores.len() == 1;
        let (accuracy, frr) = if binary {
            let scores: Vec<f64> = items.iter().map(|s| s.scores[0]).collect();
            let positives: Vec<bool> = items.iter().map(|s| s.label > 0).collect();
            let mut frr = Vec::new();
            for &t in target_fars {
                let p = frr_at_far(&scores, &positives, t)?;
                frr.push(FrrPoint {
                    target_far: t,
                    far: p.far,
                    frr: p.frr,
                    threshold: p.threshold,
                });
            }
            (None, frr)
        } else {
            let preds: Vec<usize> = items.iter().map(|s| s.predicted()).collect();
            let labels: Vec<usize> = items.iter().map(|s| s.label).collect();
            (Some(accuracy(&preds, &labels)?), Vec::new())
        };
        let cost = model.map(|cfg| count_cost(cfg, condition.is_playback()));
        rows.push(ConditionRow {
            condition,
            count: items.len(),
            accuracy,
            frr,
            params: cost.as_ref().map(|c| c.params),
            flops: cost.as_ref().map(|c| c.flops_per_output_frame),
        });
    }
    Ok(ConditionReport { rows })
}

impl ConditionReport {
    pub fn row(&self, condition: Condition) -> Option<&ConditionRow> {
        self.rows.iter().find(|r| r.condition == condition)
    }

    /// Aligned, tab-free text table.
    pub fn to_text(&self) -> String {
        let mut header = vec!["condition".to_string(), "n".to_string()];
        let has_acc = self.rows.iter().any(|r| r.accuracy.is_some());
        if has_acc {
            header.push("accuracy".into());
        }
        if let Some(r) = self.rows.first() {
            for p in &r.frr {
                header.push(format!("frr@far={}", p.target_far));
            }
        }
        let has_cost = self.rows.iter().any(|r| r.flops.is_some());
        if has_cost {
            header.push("params".into());
            header.push("flops".into());
        }
        let mut table = vec![header];
        for r in &self.rows {
            let mut line = vec![r.condition.to_string(), r.count.to_string()];
            if has_acc {
                line.push(r.accuracy.map(|a| format!("{:.2}", 100.0 * a)).unwrap_or_default());
            }
            for p in &r.frr {
                line.push(format!("{:.4}", p.frr));
            }
            if has_cost {
                line.push(r.params.map(|v| v.to_string()).unwrap_or_default());
                line.push(r.flops.map(|v| v.to_string()).unwrap_or_default());
            }
            table.push(line);
        }
        let widths: Vec<usize> = (0..table[0].len())
            .map(|c| table.iter().map(|row| row[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &table {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, w))| {
                    if c == 0 {
                        format!("{cell:<w$}")
                    } else {
                        format!("{cell:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }

    /// One JSON object per row.
    pub fn to_jsonl(&self) -> String {
        self.rows
            .iter()
            .map(|r| serde_json::to_string(r).expect("rows serialise") + "\n")
            .collect()
    }
}
