//! Synthetic ECG built from Gaussian-shaped P, Q, R, S and T waves with
//! jittered beat intervals. The generator returns exact R-peak ground truth,
//! which makes it a self-annotating stand-in for recorded data.

use super::{AnnotatedRecord, Signal};
use crate::error::{Error, Result};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub bpm: f64,
    pub duration_s: f64,
    pub fs: f64,
    /// Fractional standard deviation of the beat-to-beat interval.
    pub rr_jitter: f64,
    /// Standard deviation of additive white noise, relative to the unit
    /// R-wave amplitude.
    pub amplitude_noise: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            bpm: 72.0,
            duration_s: 2048.0 / 360.0,
            fs: 360.0,
            rr_jitter: 0.03,
            amplitude_noise: 0.01,
        }
    }
}

/// (amplitude, offset from R in seconds, width in seconds)
const WAVES: [(f64, f64, f64); 5] = [
    (0.15, -0.20, 0.025),   // P
    (-0.10, -0.035, 0.010), // Q
    (1.00, 0.0, 0.011),     // R
    (-0.22, 0.035, 0.012),  // S
    (0.35, 0.30, 0.070),    // T
];

/// Generates a synthetic annotated ECG record, deterministic per seed.
pub fn synth_ecg(params: &SynthParams, seed: u64) -> Result<AnnotatedRecord> {
    if !(30.0..=220.0).contains(&params.bpm) {
        return Err(Error::invalid(format!(
            "bpm {} outside supported range [30, 220]",
            params.bpm
        )));
    }
    if params.fs < 100.0 {
        return Err(Error::invalid("sampling rate must be at least 100 Hz"));
    }
    if !params.duration_s.is_finite() || params.duration_s <= 0.0 {
        return Err(Error::invalid("duration must be positive"));
    }
    if params.rr_jitter < 0.0 || params.amplitude_noise < 0.0 {
        return Err(Error::invalid("noise parameters must be nonnegative"));
    }

    let n = (params.duration_s * params.fs).round() as usize;
    if n == 0 {
        return Err(Error::invalid("duration rounds to zero samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rr_base = 60.0 / params.bpm;

    // Beat schedule: first R half an interval in, then jittered intervals.
    let mut r_times = Vec::new();
    let mut t = 0.5 * rr_base;
    while t < params.duration_s {
        r_times.push(t);
        let z: f64 = rng.sample(StandardNormal);
        let rr = (rr_base * (1.0 + params.rr_jitter * z)).clamp(0.25, 2.0);
        t += rr;
    }

    let mut samples = vec![0.0; n];
    for (k, &r) in r_times.iter().enumerate() {
        // Compress the wave layout when beats come fast.
        let rr_local = if k + 1 < r_times.len() {
            r_times[k + 1] - r
        } else if k > 0 {
            r - r_times[k - 1]
        } else {
            rr_base
        };
        let squeeze = (rr_local / 0.8).min(1.0);
        for &(amp, offset, width) in &WAVES {
            let center = r + offset * squeeze;
            let span = 4.0 * width;
            let lo = (((center - span) * params.fs).floor().max(0.0)) as usize;
            let hi = ((center + span) * params.fs).ceil().min((n - 1) as f64) as usize;
            for (i, slot) in samples.iter_mut().enumerate().take(hi + 1).skip(lo) {
                let dt = i as f64 / params.fs - center;
                *slot += amp * (-dt * dt / (2.0 * width * width)).exp();
            }
        }
    }

    if params.amplitude_noise > 0.0 {
        for s in &mut samples {
            let z: f64 = rng.sample(StandardNormal);
            *s += params.amplitude_noise * z;
        }
    }

    let peaks: Vec<usize> = r_times
        .iter()
        .map(|&r| (r * params.fs).round() as usize)
        .filter(|&p| p < n)
        .collect();

    AnnotatedRecord::new(Signal::new(samples, params.fs)?, peaks, None)
}
