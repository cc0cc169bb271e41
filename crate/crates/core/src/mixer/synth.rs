use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{Condition, DatasetManifestEntry, Manifest, ManifestHeader, Split};
use super::{sir_gain, MixError, MAX_RESAMPLE};
use crate::dsp::{quantize_i16, read_wav, write_wav_i16, AudioBuffer};
use crate::roomsim::{apply_playback_path_with_tail, image_source_rir, sample_room_config};
use crate::seed::{hash_str, rng_for};

/// Peak level after which target and interferer are attenuated together so
/// that the int16 mixture never clips.
const PEAK_LIMIT: f64 = 0.99;
const SIR_SLACK_DB: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthOptions {
    pub sir_db: (f64, f64),
    /// Playback variants generated per clip and condition.
    pub variants: usize,
    /// Keep only these keyword folders (all non-underscore folders if empty).
    pub keywords: Vec<String>,
    /// Keep at most this many clips per keyword and split, in sorted order.
    pub max_per_class: Option<usize>,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            sir_db: (-12.0, 3.0),
            variants: 1,
            keywords: Vec::new(),
            max_per_class: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GscClip {
    pub path: PathBuf,
    /// `keyword/file.wav`, as listed in the split files.
    pub rel: String,
    pub label: usize,
    pub split: Split,
}

/// A Speech Commands style corpus: one folder per keyword plus
/// `validation_list.txt` and `testing_list.txt`; unlisted clips are train.
#[derive(Debug, Clone)]
pub struct GscCorpus {
    pub root: PathBuf,
    pub classes: Vec<String>,
    pub clips: Vec<GscClip>,
}

fn read_list(path: &Path) -> Result<HashSet<String>, MixError> {
    if !path.exists() {
        return Ok(HashSet::new());
    }
    let text = fs::read_to_string(path).map_err(|e| MixError::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.trim().replace('\\', "/"))
        .filter(|l| !l.is_empty())
        .collect())
}

fn wav_files(dir: &Path) -> Result<Vec<PathBuf>, MixError> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(|e| MixError::io(&d, e))? {
            let p = entry.map_err(|e| MixError::io(&d, e))?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")) {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

impl GscCorpus {
    pub fn scan(root: &Path, keywords: &[String]) -> Result<Self, MixError> {
        if !root.is_dir() {
            return Err(MixError::Corpus {
                path: root.display().to_string(),
                reason: "corpus directory not found".into(),
            });
        }
        let root = root.canonicalize().map_err(|e| MixError::io(root, e))?;
        let mut classes: Vec<String> = if keywords.is_empty() {
            let mut v = Vec::new();
            for entry in fs::read_dir(&root).map_err(|e| MixError::io(&root, e))? {
                let entry = entry.map_err(|e| MixError::io(&root, e))?;
                let name = entry.file_name().to_string_lossy().into_owned();
                if entry.path().is_dir() && !name.starts_with('_') && !name.starts_with('.') {
                    v.push(name);
                }
            }
            v
        } else {
            keywords.to_vec()
        };
        classes.sort();
        classes.dedup();
        let test = read_list(&root.join("testing_list.txt"))?;
        let dev = read_list(&root.join("validation_list.txt"))?;
        let mut clips = Vec::new();
        for (label, word) in classes.iter().enumerate() {
            let dir = root.join(word);
            if !dir.is_dir() {
                return Err(MixError::Corpus {
                    path: dir.display().to_string(),
                    reason: "keyword folder not found".into(),
                });
            }
            let mut names: Vec<String> = fs::read_dir(&dir)
                .map_err(|e| MixError::io(&dir, e))?
                .filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|n| n.to_ascii_lowercase().ends_with(".wav"))
                .collect();
            names.sort();
            for name in names {
                let rel = format!("{word}/{name}");
                let split = if test.contains(&rel) {
                    Split::Test
                } else if dev.contains(&rel) {
                    Split::Dev
                } else {
                    Split::Train
                };
                clips.push(GscClip {
                    path: dir.join(&name),
                    rel,
                    label,
                    split,
                });
            }
        }
        if clips.is_empty() {
            return Err(MixError::Corpus {
                path: root.display().to_string(),
                reason: "no keyword clips found".into(),
            });
        }
        Ok(Self { root, classes, clips })
    }

    /// Keeps the first `n` clips of each (keyword, split) cell.
    pub fn truncate_per_class(&mut self, n: usize) {
        let mut seen: BTreeMap<(usize, Split), usize> = BTreeMap::new();
        self.clips.retain(|c| {
            let k = seen.entry((c.label, c.split)).or_default();
            *k += 1;
            *k <= n
        });
    }

    pub fn split_counts(&self) -> BTreeMap<(String, Split), usize> {
        let mut out = BTreeMap::new();
        for c in &self.clips {
            *out.entry((self.classes[c.label].clone(), c.split)).or_default() += 1;
        }
        out
    }
}

struct PlaybackMix {
    entry: DatasetManifestEntry,
    mixture: Vec<i16>,
    reference: Vec<i16>,
    interferer: Vec<i16>,
    target: Vec<i16>,
}

fn ints(x: &[f64], gain: f64) -> Vec<i16> {
    x.iter().map(|&v| quantize_i16(v * gain)).collect()
}

fn int_power(x: &[i16]) -> f64 {
    x.iter().map(|&v| (v as f64) * (v as f64)).sum()
}

#[allow(clippy::too_many_arguments)]
fn synth_one(
    clip: &GscClip,
    target: &AudioBuffer,
    condition: Condition,
    variant: usize,
    corpus: &[PathBuf],
    opts: &SynthOptions,
    master_seed: u64,
    out_dir: &Path,
) -> Result<Option<PlaybackMix>, MixError> {
    let len = target.len();
    if target.energy() == 0.0 || len == 0 {
        return Ok(None);
    }
    let mut rng = rng_for(master_seed, &[hash_str(&clip.rel), condition as u64, variant as u64]);
    for _ in 0..MAX_RESAMPLE {
        let src_idx = rng.random_range(0..corpus.len());
        let src = read_wav(&corpus[src_idx])?;
        let offset = if src.len() > len {
            rng.random_range(0..=src.len() - len)
        } else {
            0
        };
        let end = (offset + len).min(src.len());
        let reference = AudioBuffer::new(src.samples()[offset..end].to_vec())?.fit_to(len);
        let room_seed: u64 = rng.random();
        let sir_req = rng.random_range(opts.sir_db.0..opts.sir_db.1);
        if reference.energy() == 0.0 {
            continue;
        }
        let room = sample_room_config(&mut rng_for(room_seed, &[]));
        let rir = image_source_rir(&room)?;
        let reverberated = apply_playback_path_with_tail(&reference, &rir, 0);
        let pu = target.mean_power();
        let pn = reverberated.mean_power();
        if pn == 0.0 {
            continue;
        }
        let gain = sir_gain(pu, pn, sir_req);
        let peak = target
            .samples()
            .iter()
            .zip(reverberated.samples())
            .map(|(u, n)| (u + gain * n).abs().max(u.abs()).max((gain * n).abs()))
            .fold(0.0, f64::max);
        let atten = if peak > PEAK_LIMIT { PEAK_LIMIT / peak } else { 1.0 };
        let tq = ints(target.samples(), atten);
        let nq = ints(reverberated.samples(), gain * atten);
        let (pu, pn) = (int_power(&tq), int_power(&nq));
        if pu == 0.0 || pn == 0.0 {
            continue;
        }
        let sir_db = 10.0 * (pu / pn).log10();
        if sir_db < opts.sir_db.0 - SIR_SLACK_DB || sir_db > opts.sir_db.1 + SIR_SLACK_DB {
            continue;
        }
        let mixture: Vec<i16> = tq
            .iter()
            .zip(&nq)
            .map(|(&a, &b)| i16::try_from(a as i32 + b as i32).expect("headroom prevents clipping"))
            .collect();
        let reference = ints(reference.samples(), 1.0);
        let stem = Path::new(&clip.rel)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let word = clip.rel.split('/').next().unwrap_or_default();
        let dir = PathBuf::from(condition.as_str()).join(clip.split.as_str()).join(word);
        let name = |kind: &str| dir.join(format!("{stem}_v{variant}_{kind}.wav"));
        fs::create_dir_all(out_dir.join(&dir)).map_err(|e| MixError::io(out_dir.join(&dir), e))?;
        let rel_source = corpus[src_idx].clone();
        return Ok(Some(PlaybackMix {
            entry: DatasetManifestEntry {
                mixture_path: name("mix"),
                reference_path: Some(name("ref")),
                target_path: name("tgt"),
                interferer_path: Some(name("int")),
                label: clip.label,
                sir_db: Some(sir_db),
                room_seed: Some(room_seed),
                room: Some(room),
                split: clip.split,
                condition,
                interferer_source: Some(rel_source),
                interferer_offset: Some(offset),
                interferer_gain: Some(gain * atten),
                target_gain: Some(atten),
                variant,
            },
            mixture,
            reference,
            interferer: nq,
            target: tq,
        }));
    }
    Err(MixError::ResampleExhausted(MAX_RESAMPLE))
}

/// Builds the playback-mixture dataset. For every clip of `gscv2_dir` a
/// non-playback entry points at the original file; for each `(condition,
/// corpus_dir)` pair, `opts.variants` mixtures are written under
/// `out_dir/<condition>/<split>/<keyword>/` together with their reference,
/// reverberated interferer and target. The manifest is written to
/// `out_dir/manifest.jsonl` with paths relative to `out_dir`, and returned
/// with those paths resolved.
///
/// Every random draw of a mixture depends only on `master_seed`, the clip's
/// relative path, the condition and the variant index.
pub fn build_speechcommands_mix(
    gscv2_dir: &Path,
    interferers: &[(Condition, PathBuf)],
    out_dir: &Path,
    master_seed: u64,
    opts: &SynthOptions,
) -> Result<Manifest, MixError> {
    if !(opts.sir_db.0 < opts.sir_db.1) {
        return Err(MixError::BadSir(opts.sir_db.1 - opts.sir_db.0));
    }
    let mut corpus = GscCorpus::scan(gscv2_dir, &opts.keywords)?;
    if let Some(n) = opts.max_per_class {
        corpus.truncate_per_class(n);
    }
    let mut pools = Vec::new();
    for (condition, dir) in interferers {
        if !condition.is_playback() {
            continue;
        }
        if !dir.is_dir() {
            return Err(MixError::Corpus {
                path: dir.display().to_string(),
                reason: "interferer corpus directory not found".into(),
            });
        }
        let files = wav_files(dir)?;
        if files.is_empty() {
            return Err(MixError::Corpus {
                path: dir.display().to_string(),
                reason: "interferer corpus has no WAV files".into(),
            });
        }
        pools.push((*condition, files));
    }
    fs::create_dir_all(out_dir).map_err(|e| MixError::io(out_dir, e))?;

    let per_clip: Vec<Result<Vec<DatasetManifestEntry>, MixError>> = corpus
        .clips
        .par_iter()
        .map(|clip| {
            let target = read_wav(&clip.path)?;
            let mut entries = vec![DatasetManifestEntry {
                mixture_path: clip.path.clone(),
                reference_path: None,
                target_path: clip.path.clone(),
                interferer_path: None,
                label: clip.label,
                sir_db: None,
                room_seed: None,
                room: None,
                split: clip.split,
                condition: Condition::NonPlayback,
                interferer_source: None,
                interferer_offset: None,
                interferer_gain: None,
                target_gain: None,
                variant: 0,
            }];
            for (condition, files) in &pools {
                for v in 0..opts.variants {
                    let Some(m) = synth_one(clip, &target, *condition, v, files, opts, master_seed, out_dir)? else {
                        continue;
                    };
                    let e = &m.entry;
                    write_wav_i16(out_dir.join(&e.mixture_path), &m.mixture)?;
                    write_wav_i16(out_dir.join(e.reference_path.as_ref().unwrap()), &m.reference)?;
                    write_wav_i16(out_dir.join(e.interferer_path.as_ref().unwrap()), &m.interferer)?;
                    write_wav_i16(out_dir.join(&e.target_path), &m.target)?;
                    entries.push(m.entry);
                }
            }
            Ok(entries)
        })
        .collect();
    let mut entries = Vec::new();
    for r in per_clip {
        entries.extend(r?);
    }
    let mut manifest = Manifest {
        header: ManifestHeader::new(master_seed, corpus.classes.clone(), opts.sir_db, opts.variants),
        entries,
    };
    manifest.save(&out_dir.join("manifest.jsonl"))?;
    manifest.resolve(out_dir);
    Ok(manifest)
}

/// Recomputes the stored interferer of a playback entry from its reference
/// and room seed, as int16 samples.
pub fn recompute_interferer(entry: &DatasetManifestEntry, reference: &AudioBuffer) -> Option<Vec<i16>> {
    let room = sample_room_config(&mut rng_for(entry.room_seed?, &[]));
    let rir = image_source_rir(&room).ok()?;
    let n = apply_playback_path_with_tail(reference, &rir, 0);
    Some(ints(n.samples(), entry.interferer_gain?))
}
