//! Command implementations behind the CLI: dataset synthesis, encryption,
//! two-level decryption and the batch evaluation harness.

use std::fs;
use std::path::{Path, PathBuf};

use mlcs_core::codec::{
    encrypt_with, recover_user_a, recover_user_a_with, recover_user_b, recover_user_b_with,
    KeyMaterial, MaskParams,
};
use mlcs_core::ecg::{pan_tompkins, segment, synth_ecg, SynthParams};
use mlcs_core::metrics::{aggregate, peak_match, psnr, EvalReport, EvalRow};
use mlcs_core::{AnnotatedRecord, Signal};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::formats;

/// Per-signal seeds derived from the master seed by index, so batch results
/// are independent of scheduling order.
pub fn signal_seed(master: u64, index: usize) -> u64 {
    master ^ index as u64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthArgs {
    pub samples: usize,
    pub window: usize,
    pub bpm: f64,
    pub fs: f64,
    pub rr_jitter: f64,
    pub amplitude_noise: f64,
    pub seed: u64,
}

impl Default for SynthArgs {
    fn default() -> Self {
        SynthArgs {
            samples: 8 * 2048,
            window: 2048,
            bpm: 72.0,
            fs: 360.0,
            rr_jitter: 0.04,
            amplitude_noise: 0.002,
            seed: 3,
        }
    }
}

/// Generates a synthetic record, splits it into windows and writes one CSV
/// (plus `.peaks` sidecar) per segment. Returns the written paths.
pub fn cmd_synth(args: &SynthArgs, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if args.window == 0 {
        return Err(CliError::validation("window must be positive"));
    }
    if args.samples < args.window {
        return Err(CliError::validation(format!(
            "requested {} samples, shorter than one {}-sample window",
            args.samples, args.window
        )));
    }
    let params = SynthParams {
        bpm: args.bpm,
        duration_s: args.samples as f64 / args.fs,
        fs: args.fs,
        rr_jitter: args.rr_jitter,
        amplitude_noise: args.amplitude_noise,
    };
    let record = synth_ecg(&params, args.seed)?;
    let segments = segment(&record, args.window)?;
    fs::create_dir_all(out_dir)?;
    let mut paths = Vec::with_capacity(segments.len());
    for (idx, seg) in segments.iter().enumerate() {
        let path = out_dir.join(format!("segment_{idx:04}.csv"));
        formats::write_record(&path, seg)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Encrypts one signal file into a ciphertext file.
pub fn cmd_encrypt(
    in_path: &Path,
    key_path: &Path,
    cfg: &ExperimentConfig,
    sign_seed: u64,
    out_path: &Path,
) -> Result<()> {
    cfg.validate()?;
    let record = formats::read_record(in_path)?;
    let keys = formats::read_key_file(key_path)?;
    let embed = keys.embed_key()?;
    check_key_config_consistency(cfg, &keys.sense, &embed)?;

    let params = MaskParams {
        mode: cfg.mask_mode(),
        sign_seed,
    };
    let encrypted = mlcs_core::codec::encrypt(
        &record.signal,
        &keys.sense,
        &embed,
        &params,
        &cfg.codec_config(),
    )?;
    formats::write_ciphertext(out_path, &encrypted.ciphertext)?;
    Ok(())
}

/// The key file must agree with the experiment config where both pin the
/// same quantity.
fn check_key_config_consistency(
    cfg: &ExperimentConfig,
    sense: &mlcs_core::SenseKey,
    embed: &mlcs_core::EmbedKey,
) -> Result<()> {
    if sense.n != cfg.n || sense.mr != cfg.mr {
        return Err(CliError::validation(format!(
            "key file (n={}, mr={}) disagrees with config (n={}, mr={})",
            sense.n, sense.mr, cfg.n, cfg.mr
        )));
    }
    if embed.t != cfg.t || embed.a != cfg.embedding_power {
        return Err(CliError::validation(format!(
            "key file (t={}, a={}) disagrees with config (t={}, a={})",
            embed.t, embed.a, cfg.t, cfg.embedding_power
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryLevel {
    SemiAuthorized,
    FullyAuthorized,
}

/// Decrypts a ciphertext file at the requested authorization level. Level b
/// additionally writes a `<stem>_report.csv` next to the output.
pub fn cmd_decrypt(
    in_path: &Path,
    key_path: &Path,
    level: RecoveryLevel,
    cfg: &ExperimentConfig,
    fs_hz: f64,
    out_path: &Path,
) -> Result<()> {
    let ct = formats::read_ciphertext(in_path)?;
    let keys = formats::read_key_file(key_path)?;
    let codec_cfg = cfg.codec_config();

    match level {
        RecoveryLevel::SemiAuthorized => {
            let signal = recover_user_a(&ct, &keys.sense, &codec_cfg, fs_hz)?;
            formats::write_signal_csv(out_path, &signal)?;
        }
        RecoveryLevel::FullyAuthorized => {
            let embed = keys.embed_key()?;
            let report = recover_user_b(&ct, &keys.sense, &embed, &codec_cfg, fs_hz, None)?;
            formats::write_signal_csv(out_path, &report.signal)?;
            let report_path = report_path_for(out_path);
            let mut text = String::from(
                "watermark_recovered_exactly,solver_converged,residual_norm,decode_error\n",
            );
            text.push_str(&format!(
                "{},{},{},{}\n",
                report.watermark_recovered_exactly,
                report.solver_converged,
                report.residual_norm,
                report.decode_error.as_deref().unwrap_or("")
            ));
            fs::write(report_path, text)?;
        }
    }
    Ok(())
}

pub fn report_path_for(out_path: &Path) -> PathBuf {
    let stem = out_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "recovered".into());
    out_path.with_file_name(format!("{stem}_report.csv"))
}

/// One evaluated signal: metrics row or failure note.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub index: usize,
    pub path: PathBuf,
    pub row: Option<EvalRow>,
    pub error: Option<String>,
}

/// Runs encrypt -> recover A -> recover B -> metrics over a dataset
/// directory. Per-signal failures are recorded and the run continues.
pub fn evaluate_dataset(
    dataset_dir: &Path,
    cfg: &ExperimentConfig,
) -> Result<(Vec<EvalOutcome>, EvalReport)> {
    cfg.validate()?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dataset_dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
        .collect();
    paths.sort();
    paths.truncate(cfg.batch_size);
    if paths.is_empty() {
        return Err(CliError::validation(format!(
            "no .csv signals found in {}",
            dataset_dir.display()
        )));
    }

    let sense = cfg.sense_key()?;
    let embed = cfg.embed_key()?;
    let mode = cfg.mask_mode();
    let codec_cfg = cfg.codec_config();
    let km = KeyMaterial::prepare(&sense, &embed, mode.mask_type())?;

    let outcomes: Vec<EvalOutcome> = paths
        .par_iter()
        .enumerate()
        .map(|(index, path)| {
            let result = evaluate_one(path, index, cfg, &km, &codec_cfg, mode);
            match result {
                Ok(row) => EvalOutcome {
                    index,
                    path: path.clone(),
                    row: Some(row),
                    error: None,
                },
                Err(err) => EvalOutcome {
                    index,
                    path: path.clone(),
                    row: None,
                    error: Some(err.to_string()),
                },
            }
        })
        .collect();

    let rows: Vec<EvalRow> = outcomes.iter().filter_map(|o| o.row.clone()).collect();
    if rows.is_empty() {
        return Err(CliError::validation(
            "every signal in the batch failed to evaluate",
        ));
    }
    let report = aggregate(rows)?;
    Ok((outcomes, report))
}

fn evaluate_one(
    path: &Path,
    index: usize,
    cfg: &ExperimentConfig,
    km: &KeyMaterial,
    codec_cfg: &mlcs_core::CodecConfig,
    mode: mlcs_core::MaskMode,
) -> Result<EvalRow> {
    let record: AnnotatedRecord = formats::read_record(path)?;
    if record.signal.len() != cfg.n {
        return Err(CliError::validation(format!(
            "{}: expected {} samples, found {}",
            path.display(),
            cfg.n,
            record.signal.len()
        )));
    }
    let original = &record.signal;

    let params = MaskParams {
        mode,
        sign_seed: signal_seed(cfg.seed, index),
    };
    let encrypted = encrypt_with(km, original, &params, codec_cfg)?;

    let signal_a = recover_user_a_with(km, &encrypted.ciphertext, codec_cfg, cfg.fs)?;
    let report_b = recover_user_b_with(
        km,
        &encrypted.ciphertext,
        codec_cfg,
        cfg.fs,
        Some(&encrypted.witness.watermark),
    )?;

    // Reference peaks come from the detector on the original signal, and the
    // same detector runs on both recoveries.
    let reference = pan_tompkins(original)?;
    let detected_a = detect_or_empty(&signal_a);
    let detected_b = detect_or_empty(&report_b.signal);
    let (precision_a, recall_a) = peak_match(&reference, &detected_a, 10);
    let (precision_b, recall_b) = peak_match(&reference, &detected_b, 10);

    Ok(EvalRow {
        psnr_a: psnr(original, &signal_a)?,
        psnr_b: psnr(original, &report_b.signal)?,
        precision_a,
        recall_a,
        precision_b,
        recall_b,
        watermark_exact: report_b.watermark_recovered_exactly,
    })
}

/// Heavily degraded recoveries can be too wild for the detector's
/// preconditions; treat that as "no peaks found".
fn detect_or_empty(signal: &Signal) -> Vec<usize> {
    pan_tompkins(signal).unwrap_or_default()
}

/// Formats the evaluation CSV: one row per signal plus an aggregate row.
pub fn render_evaluation_csv(outcomes: &[EvalOutcome], report: &EvalReport) -> String {
    let mut out = String::from(
        "signal,psnr_a,psnr_b,precision_a,recall_a,precision_b,recall_b,watermark_exact,error\n",
    );
    for outcome in outcomes {
        match &outcome.row {
            Some(row) => {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},\n",
                    outcome.path.file_name().unwrap_or_default().to_string_lossy(),
                    row.psnr_a,
                    row.psnr_b,
                    row.precision_a,
                    row.recall_a,
                    row.precision_b,
                    row.recall_b,
                    row.watermark_exact,
                ));
            }
            None => {
                out.push_str(&format!(
                    "{},,,,,,,,{}\n",
                    outcome.path.file_name().unwrap_or_default().to_string_lossy(),
                    outcome.error.as_deref().unwrap_or("unknown error"),
                ));
            }
        }
    }
    out.push_str(&format!(
        "mean,{},{},{},{},{},{},{},\n",
        report.psnr_a,
        report.psnr_b,
        report.precision_a,
        report.recall_a,
        report.precision_b,
        report.recall_b,
        report.full_recovery_rate,
    ));
    out
}

/// Full evaluate command: run the harness and write the CSV.
pub fn cmd_evaluate(dataset_dir: &Path, cfg: &ExperimentConfig, out_csv: &Path) -> Result<EvalReport> {
    let (outcomes, report) = evaluate_dataset(dataset_dir, cfg)?;
    fs::write(out_csv, render_evaluation_csv(&outcomes, &report))?;
    Ok(report)
}
