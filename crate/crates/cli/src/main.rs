use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mlcs_cli::commands::{self, RecoveryLevel, SynthArgs};
use mlcs_cli::config::ExperimentConfig;
use mlcs_cli::error::{CliError, Result};

#[derive(Parser)]
#[command(
    name = "mlcs",
    version,
    about = "Multi-level compressive-sensing encryption for ECG signals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    A,
    B,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic annotated dataset of fixed-length segments.
    Synth {
        /// Output directory for segment CSV files.
        #[arg(long)]
        out: PathBuf,
        /// Total samples to generate before segmentation.
        #[arg(long, default_value_t = 8 * 2048)]
        samples: usize,
        /// Segment window length in samples.
        #[arg(long, default_value_t = 2048)]
        window: usize,
        #[arg(long, default_value_t = 72.0)]
        bpm: f64,
        #[arg(long, default_value_t = 360.0)]
        fs: f64,
        /// Additive white noise standard deviation.
        #[arg(long, default_value_t = 0.002)]
        noise: f64,
        /// Beat interval jitter (fractional standard deviation).
        #[arg(long, default_value_t = 0.04)]
        jitter: f64,
        #[arg(long, default_value_t = 3)]
        seed: u64,
    },
    /// Encrypt a signal CSV into a ciphertext file.
    Encrypt {
        /// Input signal CSV.
        input: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Named parameter preset.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// JSON experiment config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Per-signal sign-pattern seed (nonce).
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recover a signal from a ciphertext file.
    Decrypt {
        /// Input ciphertext file.
        input: PathBuf,
        #[arg(long)]
        key: PathBuf,
        /// Authorization level: a (semi) or b (full).
        #[arg(long, value_enum)]
        level: Level,
        #[arg(long)]
        out: PathBuf,
        /// Sampling rate stamped on the recovered signal.
        #[arg(long, default_value_t = 360.0)]
        fs: f64,
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Encrypt, recover and score every signal in a dataset directory.
    Evaluate {
        /// Directory of signal CSV files.
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Batch size override.
        #[arg(long)]
        batch: Option<usize>,
    },
    /// List the named presets.
    Presets,
}

fn load_config(preset: Option<&str>, config: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match (preset, config) {
        (Some(name), None) => ExperimentConfig::preset(name),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            Ok(serde_json::from_str(&text)?)
        }
        (None, None) => Ok(ExperimentConfig::default()),
        (Some(_), Some(_)) => Err(CliError::validation(
            "--preset and --config are mutually exclusive",
        )),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            out,
            samples,
            window,
            bpm,
            fs,
            noise,
            jitter,
            seed,
        } => {
            let args = SynthArgs {
                samples,
                window,
                bpm,
                fs,
                rr_jitter: jitter,
                amplitude_noise: noise,
                seed,
            };
            let paths = commands::cmd_synth(&args, &out)?;
            println!("wrote {} segments to {}", paths.len(), out.display());
        }
        Command::Encrypt {
            input,
            key,
            out,
            preset,
            config,
            seed,
        } => {
            let cfg = load_config(preset.as_deref(), config.as_ref())?;
            commands::cmd_encrypt(&input, &key, &cfg, seed, &out)?;
            println!("wrote ciphertext {}", out.display());
        }
        Command::Decrypt {
            input,
            key,
            level,
            out,
            fs,
            preset,
            config,
        } => {
            let cfg = load_config(preset.as_deref(), config.as_ref())?;
            let level = match level {
                Level::A => RecoveryLevel::SemiAuthorized,
                Level::B => RecoveryLevel::FullyAuthorized,
            };
            commands::cmd_decrypt(&input, &key, level, &cfg, fs, &out)?;
            println!("wrote recovered signal {}", out.display());
        }
        Command::Evaluate {
            dataset,
            out,
            preset,
            config,
            seed,
            batch,
        } => {
            let mut cfg = load_config(preset.as_deref(), config.as_ref())?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(batch) = batch {
                cfg.batch_size = batch;
            }
            let report = commands::cmd_evaluate(&dataset, &cfg, &out)?;
            println!(
                "evaluated batch: psnr_a {:.2} dB, psnr_b {:.2} dB, recall_a {:.3}, recall_b {:.3}, full recovery {:.3}",
                report.psnr_a,
                report.psnr_b,
                report.recall_a,
                report.recall_b,
                report.full_recovery_rate
            );
            println!("wrote report {}", out.display());
        }
        Command::Presets => {
            for name in mlcs_cli::preset_names() {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
