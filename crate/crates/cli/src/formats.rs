//! File formats: signal CSV with sidecar annotations, plain-text key files,
//! and the binary ciphertext layout.
//!
//! Ciphertext bytes, all little-endian:
//!
//! ```text
//! magic "CSEW" | version u16 | n u32 | m u32 | t u32 | mask_type u8 |
//! mr f64 | [band lo u32 | band hi u32]  (fixed-band mode only) |
//! basis tag u8 | measurements m x f64
//! ```
//!
//! Mask-type tags: 0 time, 1 embedded-band frequency, 2 fixed-band
//! frequency. Basis tags: 0 identity, 1 DCT, 2 wavelet (decomposition depth
//! derived from n). The header carries no seeds, no sign pattern, no peak
//! locations and no embedded band.

use std::fs;
use std::path::{Path, PathBuf};

use mlcs_core::codec::{wavelet_levels_for, Ciphertext, CiphertextHeader, FORMAT_VERSION};
use mlcs_core::{AamiClass, AnnotatedRecord, Basis, EmbedKey, MaskType, SenseKey, Signal};

use crate::error::{CliError, Result};

const MAGIC: &[u8; 4] = b"CSEW";

// --- signal CSV ---------------------------------------------------------

/// Writes `fs=<Hz>` then one sample per line.
pub fn write_signal_csv(path: &Path, signal: &Signal) -> Result<()> {
    let mut out = String::with_capacity(signal.len() * 20 + 16);
    out.push_str(&format!("fs={}\n", signal.fs));
    for sample in &signal.samples {
        out.push_str(&format!("{sample}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_signal_csv(path: &Path) -> Result<Signal> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::validation(format!("{}: empty signal file", path.display())))?;
    let fs_value = header
        .strip_prefix("fs=")
        .and_then(|v| v.trim().parse::<f64>().ok())
        .ok_or_else(|| {
            CliError::validation(format!(
                "{}: first line must be fs=<Hz>, got {header:?}",
                path.display()
            ))
        })?;
    let mut samples = Vec::new();
    for (idx, line) in lines.enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value = trimmed.parse::<f64>().map_err(|_| {
            CliError::validation(format!(
                "{}: line {} is not a number: {trimmed:?}",
                path.display(),
                idx + 2
            ))
        })?;
        samples.push(value);
    }
    Ok(Signal::new(samples, fs_value)?)
}

fn sidecar(path: &Path, extension: &str) -> PathBuf {
    path.with_extension(extension)
}

/// Writes the signal CSV plus `.peaks` (and `.label` when present) sidecars.
pub fn write_record(path: &Path, record: &AnnotatedRecord) -> Result<()> {
    write_signal_csv(path, &record.signal)?;
    let peaks = record
        .peak_indices
        .iter()
        .map(|p| p.to_string())
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(sidecar(path, "peaks"), peaks + "\n")?;
    if let Some(label) = record.label {
        fs::write(sidecar(path, "label"), format!("{}\n", label.tag()))?;
    }
    Ok(())
}

/// Reads a signal CSV and any sidecar annotations next to it.
pub fn read_record(path: &Path) -> Result<AnnotatedRecord> {
    let signal = read_signal_csv(path)?;
    let peaks_path = sidecar(path, "peaks");
    let peak_indices = if peaks_path.exists() {
        let text = fs::read_to_string(&peaks_path)?;
        let mut peaks = Vec::new();
        for line in text.lines() {
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            peaks.push(trimmed.parse::<usize>().map_err(|_| {
                CliError::validation(format!(
                    "{}: bad peak index {trimmed:?}",
                    peaks_path.display()
                ))
            })?);
        }
        peaks
    } else {
        Vec::new()
    };
    let label_path = sidecar(path, "label");
    let label = if label_path.exists() {
        let text = fs::read_to_string(&label_path)?;
        let tag = text.trim().chars().next().ok_or_else(|| {
            CliError::validation(format!("{}: empty label file", label_path.display()))
        })?;
        Some(AamiClass::from_tag(tag)?)
    } else {
        None
    };
    Ok(AnnotatedRecord::new(signal, peak_indices, label)?)
}

// --- key files ----------------------------------------------------------

/// Key material parsed from a key file. Semi-authorized files carry only
/// the sensing fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyFile {
    pub sense: SenseKey,
    pub embed: Option<EmbedKey>,
}

impl KeyFile {
    pub fn embed_key(&self) -> Result<EmbedKey> {
        self.embed.ok_or_else(|| {
            CliError::validation(
                "key file lacks fully-authorized material (seed_b, t, a required for level b)",
            )
        })
    }
}

/// Writes a `key = value` text key file. `embed = None` produces a
/// semi-authorized (User A) key file.
pub fn write_key_file(path: &Path, sense: &SenseKey, embed: Option<&EmbedKey>) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("seed_a = {}\n", sense.seed_a));
    out.push_str(&format!("n = {}\n", sense.n));
    out.push_str(&format!("mr = {}\n", sense.mr));
    if let Some(embed) = embed {
        out.push_str(&format!("seed_b = {}\n", embed.seed_b));
        out.push_str(&format!("t = {}\n", embed.t));
        out.push_str(&format!("a = {}\n", embed.a));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_key_file(path: &Path) -> Result<KeyFile> {
    let text = fs::read_to_string(path)?;
    let mut fields = std::collections::BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| {
            CliError::validation(format!(
                "{}: line {} is not `key = value`",
                path.display(),
                idx + 1
            ))
        })?;
        fields.insert(key.trim().to_string(), value.trim().to_string());
    }
    let get = |name: &str| -> Result<&String> {
        fields
            .get(name)
            .ok_or_else(|| CliError::validation(format!("{}: missing {name}", path.display())))
    };
    let parse_u64 = |name: &str| -> Result<u64> {
        get(name)?
            .parse()
            .map_err(|_| CliError::validation(format!("{}: bad {name}", path.display())))
    };
    let parse_f64 = |name: &str| -> Result<f64> {
        get(name)?
            .parse()
            .map_err(|_| CliError::validation(format!("{}: bad {name}", path.display())))
    };
    let parse_usize = |name: &str| -> Result<usize> {
        get(name)?
            .parse()
            .map_err(|_| CliError::validation(format!("{}: bad {name}", path.display())))
    };

    let sense = SenseKey::new(parse_u64("seed_a")?, parse_usize("n")?, parse_f64("mr")?)?;
    let embed = if fields.contains_key("seed_b") || fields.contains_key("t") || fields.contains_key("a")
    {
        Some(EmbedKey::new(
            parse_u64("seed_b")?,
            parse_usize("t")?,
            parse_f64("a")?,
        )?)
    } else {
        None
    };
    Ok(KeyFile { sense, embed })
}

// --- ciphertext binary --------------------------------------------------

fn mask_type_tag(mask_type: MaskType) -> u8 {
    match mask_type {
        MaskType::Time => 0,
        MaskType::Freq => 1,
        MaskType::FixedFreq => 2,
    }
}

fn basis_tag(basis: Basis) -> u8 {
    match basis {
        Basis::Identity => 0,
        Basis::Dct => 1,
        Basis::Wavelet { .. } => 2,
    }
}

/// Serializes a ciphertext to its canonical byte layout.
pub fn serialize_ciphertext(ct: &Ciphertext) -> Vec<u8> {
    let header = &ct.header;
    let mut out = Vec::with_capacity(40 + ct.measurements.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&header.version.to_le_bytes());
    out.extend_from_slice(&(header.n as u32).to_le_bytes());
    out.extend_from_slice(&(header.m as u32).to_le_bytes());
    out.extend_from_slice(&(header.t as u32).to_le_bytes());
    out.push(mask_type_tag(header.mask_type));
    out.extend_from_slice(&header.mr.to_le_bytes());
    if let Some((lo, hi)) = header.band {
        out.extend_from_slice(&(lo as u32).to_le_bytes());
        out.extend_from_slice(&(hi as u32).to_le_bytes());
    }
    out.push(basis_tag(header.basis));
    for value in &ct.measurements {
        out.extend_from_slice(&value.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(CliError::validation("ciphertext truncated"));
        }
        let slice = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parses and validates the canonical byte layout.
pub fn parse_ciphertext(bytes: &[u8]) -> Result<Ciphertext> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(CliError::validation("not a ciphertext file (bad magic)"));
    }
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(CliError::validation(format!(
            "unsupported ciphertext version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let n = r.u32()? as usize;
    let m = r.u32()? as usize;
    let t = r.u32()? as usize;
    let mask_type = match r.u8()? {
        0 => MaskType::Time,
        1 => MaskType::Freq,
        2 => MaskType::FixedFreq,
        other => {
            return Err(CliError::validation(format!(
                "unknown mask type tag {other}"
            )))
        }
    };
    let mr = r.f64()?;
    let band = if mask_type == MaskType::FixedFreq {
        Some((r.u32()? as usize, r.u32()? as usize))
    } else {
        None
    };
    let basis = match r.u8()? {
        0 => Basis::Identity,
        1 => Basis::Dct,
        2 => Basis::Wavelet {
            levels: wavelet_levels_for(n)?,
        },
        other => return Err(CliError::validation(format!("unknown basis tag {other}"))),
    };

    let remaining = bytes.len() - r.pos;
    if remaining != m * 8 {
        return Err(CliError::validation(format!(
            "payload holds {} bytes, header expects {}",
            remaining,
            m * 8
        )));
    }
    let mut measurements = Vec::with_capacity(m);
    for _ in 0..m {
        measurements.push(r.f64()?);
    }

    let header = CiphertextHeader {
        version,
        n,
        m,
        t,
        mask_type,
        mr,
        band,
        basis,
    };
    header.validate()?;
    Ok(Ciphertext {
        header,
        measurements,
    })
}

pub fn write_ciphertext(path: &Path, ct: &Ciphertext) -> Result<()> {
    fs::write(path, serialize_ciphertext(ct))?;
    Ok(())
}

pub fn read_ciphertext(path: &Path) -> Result<Ciphertext> {
    let bytes = fs::read(path)?;
    parse_ciphertext(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_ciphertext() -> Ciphertext {
        Ciphertext {
            header: CiphertextHeader {
                version: FORMAT_VERSION,
                n: 2048,
                m: 1331,
                t: 80,
                mask_type: MaskType::FixedFreq,
                mr: 0.65,
                band: Some((20, 90)),
                basis: Basis::Dct,
            },
            measurements: (0..1331).map(|i| (i as f64 * 0.37).sin()).collect(),
        }
    }

    #[test]
    fn ciphertext_bytes_round_trip_exactly() {
        let ct = sample_ciphertext();
        let bytes = serialize_ciphertext(&ct);
        let back = parse_ciphertext(&bytes).unwrap();
        assert_eq!(ct, back);
        assert_eq!(bytes, serialize_ciphertext(&back));
    }

    #[test]
    fn tampered_version_is_rejected() {
        let mut bytes = serialize_ciphertext(&sample_ciphertext());
        bytes[4] = 0xFF;
        assert!(parse_ciphertext(&bytes).is_err());
        bytes[4] = FORMAT_VERSION as u8;
        bytes[0] = b'X';
        assert!(parse_ciphertext(&bytes).is_err());
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let mut bytes = serialize_ciphertext(&sample_ciphertext());
        bytes.truncate(bytes.len() - 5);
        assert!(parse_ciphertext(&bytes).is_err());
        let mut padded = serialize_ciphertext(&sample_ciphertext());
        padded.extend_from_slice(&[0u8; 3]);
        assert!(parse_ciphertext(&padded).is_err());
    }

    #[test]
    fn band_only_present_in_fixed_mode() {
        let mut ct = sample_ciphertext();
        ct.header.mask_type = MaskType::Freq;
        ct.header.band = None;
        let bytes = serialize_ciphertext(&ct);
        // Fixed-band serialization is 8 bytes longer than the embedded-band
        // one for the same dimensions.
        let fixed_len = serialize_ciphertext(&sample_ciphertext()).len();
        assert_eq!(bytes.len() + 8, fixed_len);
        assert_eq!(parse_ciphertext(&bytes).unwrap(), ct);
    }
}
