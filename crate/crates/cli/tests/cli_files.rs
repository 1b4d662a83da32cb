//! Command-level tests: dataset synthesis, key files, encrypt/decrypt round
//! trips through the on-disk formats.

use std::fs;

use mlcs_cli::commands::{self, RecoveryLevel, SynthArgs};
use mlcs_cli::config::ExperimentConfig;
use mlcs_cli::formats;
use mlcs_core::{EmbedKey, SenseKey};
use tempfile::TempDir;

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        mask_type: mlcs_cli::MaskKind::FixedFreq,
        mr: 0.6,
        embedding_power: 1.0,
        t: 40,
        n: 512,
        // 512 samples at 200 Hz keeps segments above the peak detector's
        // two-second minimum.
        fs: 200.0,
        band: (10, 40),
        ..ExperimentConfig::default()
    }
}

fn write_keys(dir: &TempDir, cfg: &ExperimentConfig) -> (std::path::PathBuf, std::path::PathBuf) {
    let sense = cfg.sense_key().unwrap();
    let embed = cfg.embed_key().unwrap();
    let full = dir.path().join("full.key");
    let semi = dir.path().join("semi.key");
    formats::write_key_file(&full, &sense, Some(&embed)).unwrap();
    formats::write_key_file(&semi, &sense, None).unwrap();
    (full, semi)
}

fn synth_dataset(dir: &TempDir, cfg: &ExperimentConfig, segments: usize) -> std::path::PathBuf {
    let data = dir.path().join("data");
    let args = SynthArgs {
        samples: segments * cfg.n,
        window: cfg.n,
        fs: cfg.fs,
        ..SynthArgs::default()
    };
    commands::cmd_synth(&args, &data).unwrap();
    data
}

#[test]
fn synth_writes_deterministic_segments() {
    let dir = TempDir::new().unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    let args = SynthArgs {
        samples: 3 * 2048,
        ..SynthArgs::default()
    };
    let paths1 = commands::cmd_synth(&args, &out1).unwrap();
    let paths2 = commands::cmd_synth(&args, &out2).unwrap();
    assert_eq!(paths1.len(), 3);
    for (p1, p2) in paths1.iter().zip(&paths2) {
        assert_eq!(fs::read(p1).unwrap(), fs::read(p2).unwrap());
    }

    let record = formats::read_record(&paths1[0]).unwrap();
    assert_eq!(record.signal.len(), 2048);
    assert!(!record.peak_indices.is_empty());
}

#[test]
fn synth_full_record_makes_128_segments() {
    let dir = TempDir::new().unwrap();
    let args = SynthArgs {
        samples: 1 << 18,
        window: 2048,
        ..SynthArgs::default()
    };
    let paths = commands::cmd_synth(&args, &dir.path().join("full")).unwrap();
    assert_eq!(paths.len(), 128);
}

#[test]
fn synth_rejects_short_requests() {
    let dir = TempDir::new().unwrap();
    let args = SynthArgs {
        samples: 100,
        window: 2048,
        ..SynthArgs::default()
    };
    assert!(commands::cmd_synth(&args, &dir.path().join("x")).is_err());
}

#[test]
fn key_file_round_trip_and_levels() {
    let dir = TempDir::new().unwrap();
    let sense = SenseKey::new(42, 2048, 0.65).unwrap();
    let embed = EmbedKey::new(43, 110, 0.1).unwrap();

    let full = dir.path().join("full.key");
    formats::write_key_file(&full, &sense, Some(&embed)).unwrap();
    let parsed = formats::read_key_file(&full).unwrap();
    assert_eq!(parsed.sense, sense);
    assert_eq!(parsed.embed, Some(embed));

    let semi = dir.path().join("semi.key");
    formats::write_key_file(&semi, &sense, None).unwrap();
    let parsed = formats::read_key_file(&semi).unwrap();
    assert_eq!(parsed.sense, sense);
    assert!(parsed.embed.is_none());
    assert!(parsed.embed_key().is_err());
}

#[test]
fn encrypt_decrypt_files_end_to_end() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config();
    let (full_key, semi_key) = write_keys(&dir, &cfg);
    let data = synth_dataset(&dir, &cfg, 1);
    let signal_path = data.join("segment_0000.csv");

    let ct_path = dir.path().join("out.csew");
    commands::cmd_encrypt(&signal_path, &full_key, &cfg, 9, &ct_path).unwrap();
    let ct = formats::read_ciphertext(&ct_path).unwrap();
    assert_eq!(ct.header.n, cfg.n);
    assert_eq!(ct.header.band, Some(cfg.band));

    // Level a works with the semi-authorized key file.
    let rec_a = dir.path().join("rec_a.csv");
    commands::cmd_decrypt(
        &ct_path,
        &semi_key,
        RecoveryLevel::SemiAuthorized,
        &cfg,
        cfg.fs,
        &rec_a,
    )
    .unwrap();
    let sig_a = formats::read_signal_csv(&rec_a).unwrap();
    assert_eq!(sig_a.len(), cfg.n);

    // Level b needs the full key file.
    let rec_b = dir.path().join("rec_b.csv");
    let denied = commands::cmd_decrypt(
        &ct_path,
        &semi_key,
        RecoveryLevel::FullyAuthorized,
        &cfg,
        cfg.fs,
        &rec_b,
    );
    assert!(denied.is_err());

    commands::cmd_decrypt(
        &ct_path,
        &full_key,
        RecoveryLevel::FullyAuthorized,
        &cfg,
        cfg.fs,
        &rec_b,
    )
    .unwrap();
    let sig_b = formats::read_signal_csv(&rec_b).unwrap();
    assert_eq!(sig_b.len(), cfg.n);

    let report = fs::read_to_string(commands::report_path_for(&rec_b)).unwrap();
    assert!(report.starts_with("watermark_recovered_exactly"));
    assert!(report.lines().nth(1).unwrap().starts_with("true"));
}

#[test]
fn level_a_output_ignores_embedding_material() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config();
    let (full_key, semi_key) = write_keys(&dir, &cfg);
    let data = synth_dataset(&dir, &cfg, 1);
    let signal_path = data.join("segment_0000.csv");

    let ct_path = dir.path().join("out.csew");
    commands::cmd_encrypt(&signal_path, &full_key, &cfg, 3, &ct_path).unwrap();

    let out_full = dir.path().join("a_full.csv");
    let out_semi = dir.path().join("a_semi.csv");
    commands::cmd_decrypt(
        &ct_path,
        &full_key,
        RecoveryLevel::SemiAuthorized,
        &cfg,
        cfg.fs,
        &out_full,
    )
    .unwrap();
    commands::cmd_decrypt(
        &ct_path,
        &semi_key,
        RecoveryLevel::SemiAuthorized,
        &cfg,
        cfg.fs,
        &out_semi,
    )
    .unwrap();
    assert_eq!(fs::read(&out_full).unwrap(), fs::read(&out_semi).unwrap());
}

#[test]
fn mismatched_key_and_config_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = small_config();
    let data = synth_dataset(&dir, &cfg, 1);
    let signal_path = data.join("segment_0000.csv");

    let mut other = cfg.clone();
    other.mr = 0.3;
    let sense = other.sense_key().unwrap();
    let embed = other.embed_key().unwrap();
    let key = dir.path().join("other.key");
    formats::write_key_file(&key, &sense, Some(&embed)).unwrap();

    let ct_path = dir.path().join("out.csew");
    assert!(commands::cmd_encrypt(&signal_path, &key, &cfg, 0, &ct_path).is_err());
}

#[test]
fn evaluate_writes_rows_and_aggregate() {
    let dir = TempDir::new().unwrap();
    let mut cfg = small_config();
    cfg.batch_size = 3;
    let data = synth_dataset(&dir, &cfg, 3);

    let out_csv = dir.path().join("eval.csv");
    let report = commands::cmd_evaluate(&data, &cfg, &out_csv).unwrap();
    assert!(
        report.full_recovery_rate > 0.5,
        "full recovery rate {}",
        report.full_recovery_rate
    );
    assert!(report.psnr_b > report.psnr_a);

    let text = fs::read_to_string(&out_csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 3 + 1); // header + rows + aggregate
    assert!(lines[0].starts_with("signal,psnr_a"));
    assert!(lines[4].starts_with("mean,"));
}

#[test]
fn evaluate_on_empty_dir_fails_without_output() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    let out_csv = dir.path().join("eval.csv");
    assert!(commands::cmd_evaluate(&empty, &small_config(), &out_csv).is_err());
    assert!(!out_csv.exists());
}
