//! Evaluation measures: PSNR, R-peak precision/recall at a fixed sample
//! tolerance, and the full mask-recovery rate of a batch.

use crate::ecg::Signal;
use crate::error::{Error, Result};

/// Peak signal-to-noise ratio in dB, with the peak term taken as the
/// dynamic range of the reference signal. Returns `f64::INFINITY` when the
/// two signals are identical.
pub fn psnr(reference: &Signal, test: &Signal) -> Result<f64> {
    if reference.len() != test.len() {
        return Err(Error::invalid(format!(
            "psnr length mismatch: {} vs {}",
            reference.len(),
            test.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::invalid("psnr of empty signals"));
    }
    let max = reference
        .samples
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let min = reference
        .samples
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let range = max - min;
    if !range.is_finite() || range <= 0.0 {
        return Err(Error::invalid("psnr reference has zero dynamic range"));
    }
    let mse = reference
        .samples
        .iter()
        .zip(&test.samples)
        .map(|(r, t)| (r - t) * (r - t))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (range * range / mse).log10())
}

/// One-to-one greedy matching of detected peaks against reference peaks.
/// A detection matches the earliest unmatched reference within `tol`
/// samples; surplus detections near an already matched reference count
/// against precision. Both lists must be sorted ascending.
///
/// Returns `(precision, recall)`. Empty-list conventions: both empty gives
/// (1, 1); an empty side scores 0 for its own measure and 1 for the
/// vacuous one.
pub fn peak_match(reference: &[usize], detected: &[usize], tol: usize) -> (f64, f64) {
    debug_assert!(reference.windows(2).all(|w| w[0] <= w[1]));
    debug_assert!(detected.windows(2).all(|w| w[0] <= w[1]));

    if reference.is_empty() && detected.is_empty() {
        return (1.0, 1.0);
    }
    if detected.is_empty() {
        return (if reference.is_empty() { 1.0 } else { 0.0 }, 0.0);
    }
    if reference.is_empty() {
        return (0.0, 1.0);
    }

    let mut matches = 0usize;
    let mut i = 0usize; // reference cursor
    let mut j = 0usize; // detection cursor
    while i < reference.len() && j < detected.len() {
        let r = reference[i] as i64;
        let d = detected[j] as i64;
        if (r - d).abs() <= tol as i64 {
            matches += 1;
            i += 1;
            j += 1;
        } else if d < r {
            j += 1;
        } else {
            i += 1;
        }
    }
    (
        matches as f64 / detected.len() as f64,
        matches as f64 / reference.len() as f64,
    )
}

/// Fraction of signals whose watermark was recovered without any symbol
/// error.
pub fn full_recovery_rate(exact_flags: &[bool]) -> Result<f64> {
    if exact_flags.is_empty() {
        return Err(Error::invalid("full recovery rate of an empty batch"));
    }
    Ok(exact_flags.iter().filter(|&&b| b).count() as f64 / exact_flags.len() as f64)
}

/// Per-signal evaluation outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub psnr_a: f64,
    pub psnr_b: f64,
    pub precision_a: f64,
    pub recall_a: f64,
    pub precision_b: f64,
    pub recall_b: f64,
    pub watermark_exact: bool,
}

/// Batch means in the shape of the reported evaluation tables.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub psnr_a: f64,
    pub psnr_b: f64,
    pub precision_a: f64,
    pub recall_a: f64,
    pub precision_b: f64,
    pub recall_b: f64,
    pub full_recovery_rate: f64,
    pub rows: Vec<EvalRow>,
}

/// Aggregates per-signal rows into batch means.
pub fn aggregate(rows: Vec<EvalRow>) -> Result<EvalReport> {
    if rows.is_empty() {
        return Err(Error::invalid("aggregate of an empty batch"));
    }
    let n = rows.len() as f64;
    let mean = |f: &dyn Fn(&EvalRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let flags: Vec<bool> = rows.iter().map(|r| r.watermark_exact).collect();
    Ok(EvalReport {
        psnr_a: mean(&|r| r.psnr_a),
        psnr_b: mean(&|r| r.psnr_b),
        precision_a: mean(&|r| r.precision_a),
        recall_a: mean(&|r| r.recall_a),
        precision_b: mean(&|r| r.precision_b),
        recall_b: mean(&|r| r.recall_b),
        full_recovery_rate: full_recovery_rate(&flags)?,
        rows,
    })
}
