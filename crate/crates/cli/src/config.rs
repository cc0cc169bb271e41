use std::fs;
use std::path::{Path, PathBuf};

use iaec_core::nnet::TcnConfig;
use iaec_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Manifest written by `iaec synth`; its train and dev splits are used.
    pub manifest: PathBuf,
}

/// One training run. The master `seed` drives every random draw and
/// overrides `train.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    #[serde(default)]
    pub model: TcnConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

impl ExperimentConfig {
    /// Parses and validates `text`; relative paths are taken relative to
    /// `base`. Errors carry `origin:line`.
    pub fn parse(text: &str, origin: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(1);
            CliError::Config(format!("{origin}:{line}: {}", e.message()))
        })?;
        let at = |table: Option<&str>, msg: String| {
            CliError::Config(format!("{origin}:{}: {msg}", locate(text, table, &msg)))
        };
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(at(
                None,
                format!(
                    "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                    cfg.schema_version
                ),
            ));
        }
        cfg.model.validate().map_err(|e| at(Some("model"), e.to_string()))?;
        cfg.train.seed = cfg.seed;
        cfg.train
            .validate(&cfg.model)
            .map_err(|e| at(Some("train"), e.to_string()))?;
        for p in [&mut cfg.data.manifest, &mut cfg.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if !cfg.data.manifest.is_file() {
            return Err(CliError::Data(format!(
                "{origin}:{}: manifest {} does not exist",
                locate(text, Some("data"), "manifest"),
                cfg.data.manifest.display()
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the key in `table` (top level for `None`) mentioned earliest in
/// `msg`; otherwise the table header, otherwise line 1.
fn locate(text: &str, table: Option<&str>, msg: &str) -> usize {
    let mut current: Option<String> = None;
    let mut header = None;
    let mut best: Option<(usize, usize)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            let name = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if Some(name.as_str()) == table && header.is_none() {
                header = Some(i + 1);
            }
            current = Some(name);
            continue;
        }
        let Some((key, _)) = line.split_once('=') else { continue };
        let key = key.trim();
        if current.as_deref() != table || key.is_empty() {
            continue;
        }
        if let Some(pos) = mention(msg, key) {
            if best.is_none_or(|(p, _)| pos < p) {
                best = Some((pos, i + 1));
            }
        }
    }
    best.map(|(_, line)| line).or(header).unwrap_or(1)
}

/// Offset of the first whole-word occurrence of `key` in `msg`.
fn mention(msg: &str, key: &str) -> Option<usize> {
    let word = |c: char| c.is_alphanumeric() || c == '_';
    msg.match_indices(key).map(|(i, _)| i).find(|&i| {
        let before = msg[..i].chars().next_back().is_none_or(|c| !word(c));
        let after = msg[i + key.len()..].chars().next().is_none_or(|c| !word(c));
        before && after
    })
}
