//! Batch front end: manifest-driven glottal flow extraction, feature
//! extraction and rhythm-perturbed copy synthesis, plus speed perturbation of
//! single files and EER reporting.
//!
//! Exit codes: 0 when every item succeeded, 2 when some items failed, 1 for
//! usage or configuration errors.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::{error, info, warn};
use rayon::prelude::*;
use rhythmaug::audio_io::{self, Key, ManifestEntry};
use rhythmaug::evaluation::{self, AttackMapping};
use rhythmaug::glottal::extract_glottal_flow;
use rhythmaug::rpm::{speed_perturb, PlanRecord};
use rhythmaug::synthesis::copy_synthesize;

pub mod config;

pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

/// Name of the manifest written by `augment`.
pub const AUGMENT_MANIFEST: &str = "manifest.tsv";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] rhythmaug::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(name = "rhythmaug", version, about = "Glottal flow, rhythm perturbation and EER tools")]
pub struct Cli {
    /// JSON run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory for batch commands
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Glottal flow estimation for every manifest entry
    Glottal { manifest: PathBuf },
    /// Log-mel and F0 feature files for every manifest entry
    Features { manifest: PathBuf },
    /// Copy synthesis of bonafide entries, with or without rhythm perturbation
    Augment {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "on")]
        rpm: Toggle,
        #[arg(long)]
        factor_lo: Option<f64>,
        #[arg(long)]
        factor_hi: Option<f64>,
    },
    /// Resample one file; duration scales by the factor
    Speedperturb {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        factor: f64,
    },
    /// EER report for a score file
    Eer {
        scores: PathBuf,
        /// `attack<TAB>TTS|VC` table replacing the built-in one
        #[arg(long)]
        mapping: Option<PathBuf>,
        /// Print JSON instead of a table
        #[arg(long)]
        json: bool,
        /// Fail on attacks missing from the mapping
        #[arg(long)]
        strict: bool,
    },
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

pub fn run(cli: Cli) -> Result<i32, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;

    let out = || {
        cli.out
            .clone()
            .ok_or_else(|| CliError::Usage("this command needs --out DIR".into()))
    };
    pool.install(|| match &cli.command {
        Command::Glottal { manifest } => cmd_glottal(manifest, &cfg, &out()?),
        Command::Features { manifest } => cmd_features(manifest, &cfg, &out()?),
        Command::Augment {
            manifest,
            rpm,
            factor_lo,
            factor_hi,
        } => {
            if let Some(lo) = factor_lo {
                cfg.rpm.factor_lo = *lo;
            }
            if let Some(hi) = factor_hi {
                cfg.rpm.factor_hi = *hi;
            }
            cmd_augment(manifest, &cfg, &out()?, *rpm == Toggle::On)
        }
        Command::Speedperturb { input, output, factor } => cmd_speedperturb(input, output, *factor),
        Command::Eer {
            scores,
            mapping,
            json,
            strict,
        } => cmd_eer(scores, mapping.as_deref(), *json, *strict),
    })
}

/// Loads the manifest, creates `out_dir` and echoes the effective config.
fn prepare_batch(manifest: &Path, cfg: &RunConfig, out_dir: &Path) -> Result<Vec<ManifestEntry>, CliError> {
    let entries = audio_io::read_manifest(manifest)?;
    fs::create_dir_all(out_dir)?;
    cfg.write_echo(out_dir)?;
    if entries.is_empty() {
        warn!("manifest {} has no entries", manifest.display());
    }
    Ok(entries)
}

/// Output file stem for an utterance; ids that would escape `out_dir` are refused.
fn output_path(out_dir: &Path, utt_id: &str, suffix: &str) -> Result<PathBuf, CliError> {
    if utt_id.is_empty() || utt_id.contains(['/', '\\']) || utt_id == "." || utt_id == ".." {
        return Err(CliError::Usage(format!("utt_id `{utt_id}` is not usable as a file name")));
    }
    Ok(out_dir.join(format!("{utt_id}{suffix}")))
}

fn exit_code(command: &str, total: usize, failed: usize) -> i32 {
    println!("{command}: {} ok, {failed} failed", total - failed);
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    }
}

/// Runs `job` on every entry in parallel, logging failures by utt_id.
/// Results come back in manifest order.
fn run_batch<T: Send>(
    entries: &[&ManifestEntry],
    job: impl Fn(&ManifestEntry) -> Result<T, CliError> + Sync,
) -> Vec<Option<T>> {
    entries
        .par_iter()
        .map(|entry| match job(entry) {
            Ok(v) => Some(v),
            Err(e) => {
                error!("{}: {e}", entry.utt_id);
                None
            }
        })
        .collect()
}

pub fn cmd_glottal(manifest: &Path, cfg: &RunConfig, out_dir: &Path) -> Result<i32, CliError> {
    let entries = prepare_batch(manifest, cfg, out_dir)?;
    let refs: Vec<&ManifestEntry> = entries.iter().collect();
    let results = run_batch(&refs, |entry| {
        let audio = audio_io::read_wav(&entry.path)?;
        let flow = extract_glottal_flow(&audio, &cfg.iaif.resolve(audio.sample_rate()))?;
        let path = output_path(out_dir, &entry.utt_id, ".glottal.wav")?;
        audio_io::write_wav(&path, &flow.audio, cfg.audio.encoding)?;
        Ok(flow.diagnostics)
    });
    let (frames, skipped) = results
        .iter()
        .flatten()
        .fold((0, 0), |(f, s), d| (f + d.frames, s + d.skipped_frames));
    println!("glottal: {frames} frames analysed, {skipped} passed through unfiltered");
    let failed = results.iter().filter(|r| r.is_none()).count();
    Ok(exit_code("glottal", entries.len(), failed))
}

pub fn cmd_features(manifest: &Path, cfg: &RunConfig, out_dir: &Path) -> Result<i32, CliError> {
    let entries = prepare_batch(manifest, cfg, out_dir)?;
    let refs: Vec<&ManifestEntry> = entries.iter().collect();
    let results = run_batch(&refs, |entry| {
        let audio = audio_io::read_wav(&entry.path)?;
        let bundle = rhythmaug::features::extract_features(&audio, &cfg.features)?;
        audio_io::write_features(&output_path(out_dir, &entry.utt_id, ".rfb")?, &bundle)?;
        Ok(())
    });
    let failed = results.iter().filter(|r| r.is_none()).count();
    Ok(exit_code("features", entries.len(), failed))
}

/// Writes `<utt_id>.synth.wav` (and `<utt_id>.plan.json` with RPM on) per
/// bonafide entry, plus [`AUGMENT_MANIFEST`] listing the outputs as spoof
/// trials tagged `RPM` or `COPY`.
pub fn cmd_augment(manifest: &Path, cfg: &RunConfig, out_dir: &Path, rpm_on: bool) -> Result<i32, CliError> {
    let rpm_cfg = cfg.rpm_config();
    if rpm_on {
        rpm_cfg.validate()?;
    }
    let entries = prepare_batch(manifest, cfg, out_dir)?;
    let bonafide: Vec<&ManifestEntry> = entries
        .iter()
        .filter(|e| {
            if e.key == Key::Spoof {
                warn!("{}: spoof entry skipped, only bonafide input is augmented", e.utt_id);
            }
            e.key == Key::Bonafide
        })
        .collect();
    let tag = if rpm_on { "RPM" } else { "COPY" };

    let results = run_batch(&bonafide, |entry| {
        let audio = audio_io::read_wav(&entry.path)?;
        let synth = copy_synthesize(
            &audio,
            &cfg.features,
            rpm_on.then_some(&rpm_cfg),
            &cfg.griffin_lim,
            &entry.utt_id,
        )?;
        let wav = output_path(out_dir, &entry.utt_id, ".synth.wav")?;
        audio_io::write_wav(&wav, &synth.audio, cfg.audio.encoding)?;
        if let Some(plan) = synth.plan {
            let record = PlanRecord {
                utt_id: entry.utt_id.clone(),
                seed: rpm_cfg.seed,
                segments: plan.segments,
            };
            let json = serde_json::to_string(&record).expect("plan serializes");
            fs::write(output_path(out_dir, &entry.utt_id, ".plan.json")?, json + "\n")?;
        }
        Ok(ManifestEntry {
            utt_id: format!("{}-{tag}", entry.utt_id),
            path: PathBuf::from(format!("{}.synth.wav", entry.utt_id)),
            key: Key::Spoof,
            attack: tag.to_string(),
        })
    });
    let failed = results.iter().filter(|r| r.is_none()).count();
    let produced: Vec<ManifestEntry> = results.into_iter().flatten().collect();
    audio_io::write_manifest(&out_dir.join(AUGMENT_MANIFEST), &produced)?;
    info!("{} outputs listed in {}", produced.len(), AUGMENT_MANIFEST);
    Ok(exit_code("augment", bonafide.len(), failed))
}

/// Keeps the input file's sample encoding.
pub fn cmd_speedperturb(input: &Path, output: &Path, factor: f64) -> Result<i32, CliError> {
    let (audio, encoding) = audio_io::read_wav_with_encoding(input)?;
    let perturbed = speed_perturb(&audio, factor)?;
    audio_io::write_wav(output, &perturbed, encoding)?;
    Ok(EXIT_OK)
}

pub fn cmd_eer(scores: &Path, mapping: Option<&Path>, json: bool, strict: bool) -> Result<i32, CliError> {
    let scores = evaluation::read_scores(scores)?;
    let mapping = match mapping {
        Some(path) => AttackMapping::from_file(path)?,
        None => AttackMapping::default(),
    };
    let report = evaluation::eer_breakdown(&scores, &mapping, strict)?;
    if json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_text());
    }
    Ok(EXIT_OK)
}
