use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::MixError;
use crate::roomsim::RoomConfig;

pub const MANIFEST_FORMAT: &str = "iaec-mix-manifest";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    NonPlayback,
    PlaybackTts,
    PlaybackMusic,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::NonPlayback, Condition::PlaybackTts, Condition::PlaybackMusic];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::NonPlayback => "non_playback",
            Condition::PlaybackTts => "playback_tts",
            Condition::PlaybackMusic => "playback_music",
        }
    }

    pub fn is_playback(self) -> bool {
        self != Condition::NonPlayback
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestHeader {
    pub format: String,
    pub version: u32,
    pub master_seed: u64,
    pub classes: Vec<String>,
    pub sir_db: (f64, f64),
    pub variants: usize,
}

impl ManifestHeader {
    pub fn new(master_seed: u64, classes: Vec<String>, sir_db: (f64, f64), variants: usize) -> Self {
        Self {
            format: MANIFEST_FORMAT.to_string(),
            version: MANIFEST_VERSION,
            master_seed,
            classes,
            sir_db,
            variants,
        }
    }
}

/// One mixture. Paths are stored as written (relative paths are relative to
/// the manifest's directory); [`Manifest::load`] resolves them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifestEntry {
    pub mixture_path: PathBuf,
    pub reference_path: Option<PathBuf>,
    pub target_path: PathBuf,
    pub interferer_path: Option<PathBuf>,
    pub label: usize,
    pub sir_db: Option<f64>,
    pub room_seed: Option<u64>,
    pub room: Option<RoomConfig>,
    pub split: Split,
    pub condition: Condition,
    /// Interferer source file and sample offset of the crop.
    pub interferer_source: Option<PathBuf>,
    pub interferer_offset: Option<usize>,
    /// Gain applied to the reverberated reference before quantisation.
    pub interferer_gain: Option<f64>,
    /// Common attenuation applied to the target to keep the mixture unclipped.
    pub target_gain: Option<f64>,
    pub variant: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub entries: Vec<DatasetManifestEntry>,
}

impl Manifest {
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serialises");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serialises"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), MixError> {
        let mut f = fs::File::create(path).map_err(|e| MixError::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| MixError::io(path, e))
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, MixError> {
        let err = |line: usize, reason: String| MixError::Manifest {
            path: origin.to_string(),
            line,
            reason,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| err(1, "empty manifest".into()))?;
        let header: ManifestHeader = serde_json::from_str(first).map_err(|e| err(1, format!("bad header: {e}")))?;
        if header.format != MANIFEST_FORMAT || header.version != MANIFEST_VERSION {
            return Err(err(
                1,
                format!("unsupported format {} v{}", header.format, header.version),
            ));
        }
        let mut entries = Vec::new();
        for (i, line) in lines {
            let e: DatasetManifestEntry = serde_json::from_str(line).map_err(|e| err(i + 1, e.to_string()))?;
            if e.label >= header.classes.len() {
                return Err(err(i + 1, format!("label {} out of range", e.label)));
            }
            if e.condition.is_playback() != e.reference_path.is_some() {
                return Err(err(i + 1, "reference presence does not match condition".into()));
            }
            entries.push(e);
        }
        Ok(Self { header, entries })
    }

    /// Reads a manifest and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, MixError> {
        let text = fs::read_to_string(path).map_err(|e| MixError::io(path, e))?;
        let mut m = Self::parse(&text, &path.display().to_string())?;
        m.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(m)
    }

    /// Makes relative entry paths relative to `base`.
    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for e in &mut self.entries {
            fix(&mut e.mixture_path);
            fix(&mut e.target_path);
            e.reference_path.as_mut().map(fix);
            e.interferer_path.as_mut().map(fix);
        }
    }

    /// Checks that every referenced file exists.
    pub fn check_files(&self) -> Result<(), MixError> {
        for e in &self.entries {
            let paths = [
                Some(&e.mixture_path),
                Some(&e.target_path),
                e.reference_path.as_ref(),
                e.interferer_path.as_ref(),
            ];
            for p in paths.into_iter().flatten() {
                if !p.is_file() {
                    return Err(MixError::Corpus {
                        path: p.display().to_string(),
                        reason: "referenced file is missing".into(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn select(&self, split: Split, condition: Condition) -> Vec<&DatasetManifestEntry> {
        self.entries
            .iter()
            .filter(|e| e.split == split && e.condition == condition)
            .collect()
    }
}
