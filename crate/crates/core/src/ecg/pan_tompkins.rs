//! Pan-Tompkins QRS detection: band-pass, derivative, squaring, moving
//! window integration, then dual adaptive thresholds with a refractory
//! period and RR-driven search-back. Filters are designed at the native
//! sampling rate; window lengths are scaled from the classic 200 Hz design.

use super::Signal;
use crate::error::{Error, Result};

/// Second-order section in direct form I.
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn lowpass(fc: f64, fs: f64) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * fc / fs;
        // Butterworth quality factor 1/sqrt(2).
        let alpha = w0.sin() / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
        let cosw = w0.cos();
        let a0 = 1.0 + alpha;
        Biquad {
            b: [
                (1.0 - cosw) / 2.0 / a0,
                (1.0 - cosw) / a0,
                (1.0 - cosw) / 2.0 / a0,
            ],
            a: [-2.0 * cosw / a0, (1.0 - alpha) / a0],
        }
    }

    fn highpass(fc: f64, fs: f64) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * fc / fs;
        let alpha = w0.sin() / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
        let cosw = w0.cos();
        let a0 = 1.0 + alpha;
        Biquad {
            b: [
                (1.0 + cosw) / 2.0 / a0,
                -(1.0 + cosw) / a0,
                (1.0 + cosw) / 2.0 / a0,
            ],
            a: [-2.0 * cosw / a0, (1.0 - alpha) / a0],
        }
    }

    fn run(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        let mut x1 = 0.0;
        let mut x2 = 0.0;
        let mut y1 = 0.0;
        let mut y2 = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            let yi = self.b[0] * xi + self.b[1] * x1 + self.b[2] * x2
                - self.a[0] * y1
                - self.a[1] * y2;
            x2 = x1;
            x1 = xi;
            y2 = y1;
            y1 = yi;
            y[i] = yi;
        }
        y
    }
}

/// Causal five-point derivative.
fn derivative(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let at = |i: isize| -> f64 {
        if i < 0 {
            0.0
        } else {
            x[i as usize]
        }
    };
    (0..n)
        .map(|i| {
            let i = i as isize;
            (2.0 * at(i) + at(i - 1) - at(i - 3) - 2.0 * at(i - 4)) / 8.0
        })
        .collect()
}

/// Squaring followed by a moving average over `window` samples.
fn integrate(x: &[f64], window: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    let mut sum = 0.0;
    for i in 0..x.len() {
        let sq = x[i] * x[i];
        sum += sq;
        if i >= window {
            sum -= x[i - window] * x[i - window];
        }
        out[i] = sum / window as f64;
    }
    out
}

/// Local maxima of the integrated waveform, at least `min_gap` apart.
fn candidate_peaks(mwi: &[f64], min_gap: usize) -> Vec<usize> {
    let mut peaks = Vec::new();
    let mut last: Option<usize> = None;
    for i in 1..mwi.len().saturating_sub(1) {
        if mwi[i] > 0.0 && mwi[i] >= mwi[i - 1] && mwi[i] > mwi[i + 1] {
            match last {
                Some(prev) if i - prev < min_gap => {
                    if mwi[i] > mwi[prev] {
                        *peaks.last_mut().unwrap() = i;
                        last = Some(i);
                    }
                }
                _ => {
                    peaks.push(i);
                    last = Some(i);
                }
            }
        }
    }
    peaks
}

struct Thresholds {
    spki: f64,
    npki: f64,
}

impl Thresholds {
    fn threshold1(&self) -> f64 {
        self.npki + 0.25 * (self.spki - self.npki)
    }

    fn threshold2(&self) -> f64 {
        0.5 * self.threshold1()
    }

    fn signal_peak(&mut self, value: f64) {
        self.spki = 0.125 * value + 0.875 * self.spki;
    }

    fn searchback_peak(&mut self, value: f64) {
        self.spki = 0.25 * value + 0.75 * self.spki;
    }

    fn noise_peak(&mut self, value: f64) {
        self.npki = 0.125 * value + 0.875 * self.npki;
    }
}

/// Detects R peaks and returns their sorted sample indices.
pub fn pan_tompkins(signal: &Signal) -> Result<Vec<usize>> {
    let fs = signal.fs;
    if fs < 100.0 {
        return Err(Error::invalid(format!(
            "pan_tompkins needs fs >= 100 Hz, got {fs}"
        )));
    }
    if signal.duration_s() < 2.0 {
        return Err(Error::invalid("pan_tompkins needs at least 2 s of signal"));
    }

    let bandpassed = Biquad::highpass(5.0, fs).run(&Biquad::lowpass(15.0, fs).run(&signal.samples));
    let window = (0.150 * fs).round() as usize;
    let mwi = integrate(&derivative(&bandpassed), window.max(1));

    let refractory = (0.200 * fs).round() as usize;
    let candidates = candidate_peaks(&mwi, refractory);
    if candidates.is_empty() {
        return Ok(Vec::new());
    }

    // Learning phase: initial thresholds from the first two seconds.
    let learn = ((2.0 * fs) as usize).min(mwi.len());
    let learn_max = mwi[..learn].iter().cloned().fold(0.0, f64::max);
    let learn_mean = mwi[..learn].iter().sum::<f64>() / learn as f64;
    let mut thr = Thresholds {
        spki: 0.25 * learn_max,
        npki: 0.5 * learn_mean,
    };

    let mut qrs: Vec<usize> = Vec::new();
    let mut qrs_mwi_index: Vec<usize> = Vec::new();
    let mut rr_intervals: Vec<usize> = Vec::new();

    let locate = |mwi_index: usize| -> usize {
        // The integration peak trails the R wave by roughly the window
        // length; take the raw-signal maximum over that span.
        let lo = mwi_index.saturating_sub(window + 4);
        (lo..=mwi_index)
            .max_by(|&a, &b| signal.samples[a].partial_cmp(&signal.samples[b]).unwrap())
            .unwrap_or(mwi_index)
    };

    for &cand in &candidates {
        let value = mwi[cand];
        let mut accepted = false;
        if value > thr.threshold1() {
            accepted = true;
        } else if !qrs_mwi_index.is_empty() && rr_intervals.len() >= 2 {
            // Search-back: if the expected beat is overdue, accept the
            // strongest pending candidate above the lower threshold.
            let tail = &rr_intervals[rr_intervals.len().saturating_sub(8)..];
            let rr_avg = tail.iter().sum::<usize>() as f64 / tail.len() as f64;
            let last = *qrs_mwi_index.last().unwrap();
            if (cand - last) as f64 > 1.66 * rr_avg && value > thr.threshold2() {
                thr.searchback_peak(value);
                accepted = true;
            }
        }

        if accepted {
            if value > thr.threshold1() {
                thr.signal_peak(value);
            }
            let r_index = locate(cand);
            if let Some(&last_r) = qrs.last() {
                if r_index <= last_r || r_index - last_r < refractory {
                    // Same QRS complex seen twice; keep the earlier fix.
                    thr.noise_peak(value);
                    continue;
                }
            }
            if let Some(&last) = qrs_mwi_index.last() {
                rr_intervals.push(cand - last);
            }
            qrs.push(r_index);
            qrs_mwi_index.push(cand);
        } else {
            thr.noise_peak(value);
        }
    }

    Ok(qrs)
}
