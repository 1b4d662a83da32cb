//! ECG-domain processing: R-peak detection, record segmentation and a
//! synthetic generator that carries its own ground-truth annotations.

mod pan_tompkins;
mod synth;

pub use pan_tompkins::pan_tompkins;
pub use synth::{synth_ecg, SynthParams};

use crate::error::{Error, Result};

/// A real-valued sample vector with its sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub samples: Vec<f64>,
    /// Sampling rate in Hz.
    pub fs: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        if !fs.is_finite() || fs <= 0.0 {
            return Err(Error::invalid("sampling rate must be positive"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("signal contains non-finite samples"));
        }
        Ok(Signal { samples, fs })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }
}

/// AAMI EC57 heartbeat class, carried as metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AamiClass {
    Normal,
    Supraventricular,
    Ventricular,
    Fusion,
    Unknown,
}

impl AamiClass {
    pub fn tag(&self) -> char {
        match self {
            AamiClass::Normal => 'N',
            AamiClass::Supraventricular => 'S',
            AamiClass::Ventricular => 'V',
            AamiClass::Fusion => 'F',
            AamiClass::Unknown => 'Q',
        }
    }

    pub fn from_tag(tag: char) -> Result<Self> {
        match tag {
            'N' => Ok(AamiClass::Normal),
            'S' => Ok(AamiClass::Supraventricular),
            'V' => Ok(AamiClass::Ventricular),
            'F' => Ok(AamiClass::Fusion),
            'Q' => Ok(AamiClass::Unknown),
            other => Err(Error::invalid(format!("unknown AAMI class tag {other:?}"))),
        }
    }
}

/// A signal together with its R-peak annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedRecord {
    pub signal: Signal,
    /// Strictly increasing sample indices of annotated R peaks.
    pub peak_indices: Vec<usize>,
    pub label: Option<AamiClass>,
}

impl AnnotatedRecord {
    pub fn new(
        signal: Signal,
        peak_indices: Vec<usize>,
        label: Option<AamiClass>,
    ) -> Result<Self> {
        if peak_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("peak indices must be strictly increasing"));
        }
        if let Some(&last) = peak_indices.last() {
            if last >= signal.len() {
                return Err(Error::invalid("peak index out of signal range"));
            }
        }
        Ok(AnnotatedRecord {
            signal,
            peak_indices,
            label,
        })
    }
}

/// Splits a record into consecutive non-overlapping windows of exactly
/// `window` samples, dropping the trailing remainder. Peak indices are
/// re-based to each window.
pub fn segment(record: &AnnotatedRecord, window: usize) -> Result<Vec<AnnotatedRecord>> {
    if window == 0 {
        return Err(Error::invalid("segment window must be positive"));
    }
    let total = record.signal.len() / window;
    let mut segments = Vec::with_capacity(total);
    for k in 0..total {
        let start = k * window;
        let end = start + window;
        let samples = record.signal.samples[start..end].to_vec();
        let peaks = record
            .peak_indices
            .iter()
            .filter(|&&p| p >= start && p < end)
            .map(|&p| p - start)
            .collect();
        segments.push(AnnotatedRecord {
            signal: Signal {
                samples,
                fs: record.signal.fs,
            },
            peak_indices: peaks,
            label: record.label,
        });
    }
    Ok(segments)
}
