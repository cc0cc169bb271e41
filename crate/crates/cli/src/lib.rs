//! `iaec`: data synthesis, training, evaluation, classical AEC baselines and
//! cost tables from one binary.

pub mod config;
pub mod error;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use iaec_core::aec_classic::{erle_db, nlms_cancel, wiener_oracle_cancel, NlmsConfig, WienerConfig};
use iaec_core::dsp::{read_wav, write_wav};
use iaec_core::eval::{load_examples, report_by_condition, score_examples};
use iaec_core::fixtures::{write_fixtures, FixtureConfig};
use iaec_core::mixer::{build_speechcommands_mix, Condition, Manifest, Split, SynthOptions};
use iaec_core::nnet::{count_cost, load_checkpoint, receptive_field, save_checkpoint, Fusion, TcnConfig};
use iaec_core::train::{fit, DataSources};
use serde::Serialize;

pub use config::ExperimentConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "iaec",
    version,
    about = "Keyword spotting under device playback with implicit echo cancellation"
)]
pub struct Cli {
    /// Experiment config (train, cost).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory (output file for `aec`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render synthetic keyword, TTS and music corpora.
    Fixtures(FixturesArgs),
    /// Build the playback-mixture dataset and its manifest.
    Synth(SynthArgs),
    /// Train a classifier from an experiment config.
    Train(TrainArgs),
    /// Score a checkpoint on a manifest split, per condition.
    Eval(EvalArgs),
    /// Run a classical echo canceller on one utterance.
    Aec(AecArgs),
    /// Parameter and FLOP table for every fusion mode.
    Cost,
}

#[derive(Debug, Args)]
pub struct FixturesArgs {
    #[arg(long, default_value_t = 10)]
    pub keywords: usize,
    #[arg(long, default_value_t = 40)]
    pub train_speakers: usize,
    #[arg(long, default_value_t = 6)]
    pub dev_speakers: usize,
    #[arg(long, default_value_t = 10)]
    pub test_speakers: usize,
    #[arg(long, default_value_t = 10)]
    pub interferer_clips: usize,
    #[arg(long, default_value_t = 10.0)]
    pub interferer_seconds: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Keyword corpus laid out like Speech Commands v2.
    #[arg(long)]
    pub gscv2: PathBuf,
    #[arg(long)]
    pub tts: PathBuf,
    #[arg(long)]
    pub music: PathBuf,
    #[arg(long, default_value_t = -12.0, allow_hyphen_values = true)]
    pub sir_min: f64,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    pub sir_max: f64,
    #[arg(long, default_value_t = 1)]
    pub variants: usize,
    /// Keyword folders to keep (default: all).
    #[arg(long, value_delimiter = ',')]
    pub words: Vec<String>,
    #[arg(long)]
    pub max_per_class: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Print the resolved config and cost, then exit.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// Target FARs for single-logit detectors.
    #[arg(long = "far", value_delimiter = ',')]
    pub target_fars: Vec<f64>,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Dev,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Dev => Split::Dev,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Args)]
pub struct AecArgs {
    #[arg(long, value_enum)]
    pub kind: AecKind,
    #[arg(long)]
    pub mixture: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    /// Clean target; required by the oracle Wiener filter.
    #[arg(long)]
    pub target: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AecKind {
    Nlms,
    Wiener,
}

/// Runs one parsed command, writing human-readable output to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        // a second global pool (e.g. in tests) keeps the first one
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match &cli.command {
        Command::Fixtures(a) => cmd_fixtures(&cli, a, stdout),
        Command::Synth(a) => cmd_synth(&cli, a, stdout),
        Command::Train(a) => cmd_train(&cli, a, stdout),
        Command::Eval(a) => cmd_eval(&cli, a, stdout),
        Command::Aec(a) => cmd_aec(&cli, a, stdout),
        Command::Cost => cmd_cost(&cli, stdout),
    }
}

fn out_dir(cli: &Cli) -> Result<&Path, CliError> {
    cli.out
        .as_deref()
        .ok_or_else(|| CliError::Usage("--out is required".into()))
}

fn print(stdout: &mut dyn Write, text: &str) -> Result<(), CliError> {
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| CliError::Data(format!("stdout: {e}")))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn cmd_fixtures(cli: &Cli, a: &FixturesArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = FixtureConfig {
        seed: cli.seed.unwrap_or(0),
        keywords: a.keywords,
        train_speakers: a.train_speakers,
        dev_speakers: a.dev_speakers,
        test_speakers: a.test_speakers,
        tts_clips: a.interferer_clips,
        music_clips: a.interferer_clips,
        interferer_seconds: a.interferer_seconds,
        ..FixtureConfig::default()
    };
    let root = out_dir(cli)?;
    let paths = write_fixtures(root, &cfg)?;
    let meta = serde_json::to_string_pretty(&cfg).expect("fixture config serialises");
    write_file(&root.join("fixtures.json"), &meta)?;
    print(
        stdout,
        &format!(
            "keywords {}\ntts {}\nmusic {}\n",
            paths.keywords.display(),
            paths.tts.display(),
            paths.music.display()
        ),
    )
}

fn cmd_synth(cli: &Cli, a: &SynthArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    for (what, p) in [("--gscv2", &a.gscv2), ("--tts", &a.tts), ("--music", &a.music)] {
        if !p.is_dir() {
            return Err(CliError::Data(format!("{what} {} is not a directory", p.display())));
        }
    }
    let opts = SynthOptions {
        sir_db: (a.sir_min, a.sir_max),
        variants: a.variants,
        keywords: a.words.clone(),
        max_per_class: a.max_per_class,
    };
    let interferers = vec![
        (Condition::PlaybackTts, a.tts.clone()),
        (Condition::PlaybackMusic, a.music.clone()),
    ];
    let out = out_dir(cli)?;
    let m = build_speechcommands_mix(&a.gscv2, &interferers, out, cli.seed.unwrap_or(0), &opts)?;
    let mut counts = std::collections::BTreeMap::new();
    for e in &m.entries {
        *counts.entry((e.split.as_str(), e.condition.as_str())).or_insert(0usize) += 1;
    }
    let mut text = format!("manifest {}\n", out.join("manifest.jsonl").display());
    for ((split, cond), n) in counts {
        text.push_str(&format!("{split}\t{cond}\t{n}\n"));
    }
    print(stdout, &text)
}

fn load_experiment(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

#[derive(Serialize)]
struct CostRow {
    fusion: Fusion,
    playback: bool,
    params: usize,
    flops: usize,
}

fn cost_rows(model: &TcnConfig, fusions: &[Fusion]) -> Vec<CostRow> {
    let mut rows = Vec::new();
    for &fusion in fusions {
        let cfg = TcnConfig {
            fusion,
            ..model.clone()
        };
        for playback in [false, true] {
            let c = count_cost(&cfg, playback);
            rows.push(CostRow {
                fusion,
                playback,
                params: c.params,
                flops: c.flops_per_output_frame,
            });
        }
    }
    rows
}

fn cost_table(rows: &[CostRow]) -> String {
    let mut s = format!("{:<14}{:>10}{:>10}{:>12}\n", "fusion", "playback", "params", "flops");
    for r in rows {
        s.push_str(&format!(
            "{:<14}{:>10}{:>10}{:>12}\n",
            r.fusion.name(),
            if r.playback { "yes" } else { "no" },
            r.params,
            r.flops
        ));
    }
    s
}

fn cmd_train(cli: &Cli, a: &TrainArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_experiment(cli)?;
    if a.dry_run {
        let mut text = cfg.to_toml();
        text.push_str(&format!("\n# receptive field {} frames\n", receptive_field(&cfg.model)));
        text.push_str(&cost_table(&cost_rows(&cfg.model, &[cfg.model.fusion])));
        return print(stdout, &text);
    }
    let manifest = Manifest::load(&cfg.data.manifest)?;
    manifest.check_files()?;
    if manifest.header.classes.len() != cfg.model.n_classes {
        return Err(CliError::Data(format!(
            "manifest has {} classes, model.n_classes is {}",
            manifest.header.classes.len(),
            cfg.model.n_classes
        )));
    }
    let data = DataSources::from_manifest(&manifest)?;
    create_dir(&cfg.output_dir)?;
    write_file(&cfg.output_dir.join("config.toml"), &cfg.to_toml())?;
    let log_path = cfg.output_dir.join("train_log.tsv");
    let mut log = fs::File::create(&log_path).map_err(|e| CliError::io(&log_path, e))?;
    let report = fit(&cfg.model, &cfg.train, &data, Some(&mut log))?;
    let ckpt = cfg.output_dir.join("best.ckpt");
    save_checkpoint(&ckpt, &report.best)?;
    print(
        stdout,
        &format!(
            "best epoch {} dev {:.6} after {} epochs{}\ncheckpoint {}\n",
            report.best.epoch,
            report.best.dev_metric,
            report.history.len(),
            if report.stopped_early { " (early stop)" } else { "" },
            ckpt.display()
        ),
    )
}

#[derive(Serialize)]
struct EvalMeta<'a> {
    checkpoint: &'a Path,
    manifest: &'a Path,
    split: &'a str,
    seed: u64,
    epoch: usize,
    target_fars: &'a [f64],
}

fn cmd_eval(cli: &Cli, a: &EvalArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let model_cfg = ckpt.model.config().clone();
    let manifest = Manifest::load(&a.manifest)?;
    if manifest.header.classes.len() != model_cfg.n_classes && model_cfg.n_classes != 1 {
        return Err(CliError::Data(format!(
            "checkpoint predicts {} classes, manifest has {}",
            model_cfg.n_classes,
            manifest.header.classes.len()
        )));
    }
    let split: Split = a.split.into();
    let examples = load_examples(&manifest, split)?;
    let scored = score_examples(&ckpt.model, &examples, a.batch_size.max(1))?;
    let report = report_by_condition(&scored, &a.target_fars, Some(&model_cfg))?;
    let text = report.to_text();
    if let Some(out) = &cli.out {
        create_dir(out)?;
        write_file(&out.join("report.txt"), &text)?;
        write_file(&out.join("report.jsonl"), &report.to_jsonl())?;
        let meta = EvalMeta {
            checkpoint: &a.checkpoint,
            manifest: &a.manifest,
            split: split.as_str(),
            seed: ckpt.seed,
            epoch: ckpt.epoch,
            target_fars: &a.target_fars,
        };
        write_file(
            &out.join("meta.json"),
            &serde_json::to_string_pretty(&meta).expect("meta serialises"),
        )?;
    }
    print(stdout, &text)
}

fn cmd_aec(cli: &Cli, a: &AecArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let out = cli
        .out
        .as_deref()
        .ok_or_else(|| CliError::Usage("--out is required".into()))?;
    let mixture = read_wav(&a.mixture)?;
    let reference = read_wav(&a.reference)?;
    let cleaned = match a.kind {
        AecKind::Nlms => nlms_cancel(&mixture, &reference, &NlmsConfig::default())?,
        AecKind::Wiener => {
            let target = a
                .target
                .as_deref()
                .ok_or_else(|| CliError::Usage("the oracle Wiener filter needs --target".into()))?;
            wiener_oracle_cancel(&mixture, &reference, &read_wav(target)?, &WienerConfig::default())?
        }
    };
    write_wav(out, &cleaned)?;
    // mixture to output power ratio; this is ERLE when the near end is silent
    let erle = erle_db(mixture.samples(), cleaned.samples());
    print(stdout, &format!("ERLE {erle:.2} dB\n"))
}

fn cmd_cost(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let model = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let base = path.parent().unwrap_or(Path::new("."));
            ExperimentConfig::parse(&text, &path.display().to_string(), base)?.model
        }
        None => TcnConfig::default(),
    };
    model.validate()?;
    print(stdout, &cost_table(&cost_rows(&model, &Fusion::ALL)))
}
