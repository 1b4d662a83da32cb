//! Mask construction, the additive perturbation matrix, and the ternary
//! watermark code that carries mask location and sign information.
//!
//! A mask selects columns of the measurement matrix; each selected column is
//! either sign-flipped (pattern +1) or left alone (pattern -1). The flip
//! pattern and, depending on the mode, the mask location are serialized into
//! a ternary watermark over {-a, 0, +a}.
//!
//! Watermark layout, most significant digit first, with ternary digits
//! mapped 0 -> -a, 1 -> 0, 2 -> +a and sign symbols mapped +1 -> +a,
//! -1 -> -a:
//!
//! * embedded frequency band: `[lo: 7 digits][band length: 7 digits][signs][zero pad]`
//! * fixed frequency band:    `[signs][zero pad]`
//! * time peaks:              `[peak count: 7 digits][centers: 7 digits each][signs][zero pad]`
//!
//! An empty mask encodes as the all-zero watermark. Seven digits address
//! values up to 3^7 - 1 = 2186, enough for the 2048-sample windows this
//! scheme targets.

use crate::error::{Error, Result};
use crate::sensing::SignPattern;
use nalgebra::{DMatrix, DVector};

const INDEX_DIGITS: usize = 7;
const INDEX_LIMIT: usize = 2187; // 3^INDEX_DIGITS

/// Which indices or frequency bins are masked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MaskSpec {
    /// Mask `half_width` samples on both sides of each peak center.
    TimePeaks {
        centers: Vec<usize>,
        half_width: usize,
    },
    /// Mask the coefficient band [lo, hi]. `band_embedded` selects whether
    /// the band location travels in the watermark or is known to the
    /// receiver.
    FreqBand {
        lo: usize,
        hi: usize,
        band_embedded: bool,
    },
}

/// Wire tag for the masking mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskType {
    Time,
    Freq,
    FixedFreq,
}

impl MaskSpec {
    pub fn mask_type(&self) -> MaskType {
        match self {
            MaskSpec::TimePeaks { .. } => MaskType::Time,
            MaskSpec::FreqBand {
                band_embedded: true,
                ..
            } => MaskType::Freq,
            MaskSpec::FreqBand {
                band_embedded: false,
                ..
            } => MaskType::FixedFreq,
        }
    }
}

/// Ternary watermark vector with entries in {-a, 0, +a}.
#[derive(Debug, Clone, PartialEq)]
pub struct Watermark {
    values: Vec<f64>,
}

impl Watermark {
    /// Wraps a value vector, checking the ternary alphabet exactly.
    pub fn new(values: Vec<f64>, amplitude: f64) -> Result<Self> {
        if !amplitude.is_finite() || amplitude <= 0.0 {
            return Err(Error::invalid("watermark amplitude must be positive"));
        }
        if values
            .iter()
            .any(|&v| v != 0.0 && v != amplitude && v != -amplitude)
        {
            return Err(Error::invalid(
                "watermark entries must be exactly -a, 0 or +a",
            ));
        }
        Ok(Watermark { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }

    pub fn is_all_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Decoding context: everything the receiver knows out of band.
#[derive(Debug, Clone, Copy)]
pub struct MaskContext {
    pub mask_type: MaskType,
    /// Band bounds for [`MaskType::FixedFreq`].
    pub known_band: Option<(usize, usize)>,
    /// Signal (or coefficient vector) length.
    pub n: usize,
    /// Peak mask half width for [`MaskType::Time`].
    pub half_width: usize,
}

/// Expands a mask spec into its indicator vector of length `n`.
pub fn to_mask_vector(spec: &MaskSpec, n: usize) -> Result<Vec<bool>> {
    let mut mask = vec![false; n];
    match spec {
        MaskSpec::TimePeaks {
            centers,
            half_width,
        } => {
            for &center in centers {
                if center >= n {
                    return Err(Error::invalid(format!(
                        "peak center {center} out of range for length {n}"
                    )));
                }
                let start = center.saturating_sub(*half_width);
                let end = (center + half_width).min(n - 1);
                for flag in &mut mask[start..=end] {
                    *flag = true;
                }
            }
        }
        MaskSpec::FreqBand { lo, hi, .. } => {
            if lo > hi || *hi >= n {
                return Err(Error::invalid(format!(
                    "band [{lo}, {hi}] invalid for length {n}"
                )));
            }
            for flag in &mut mask[*lo..=*hi] {
                *flag = true;
            }
        }
    }
    Ok(mask)
}

/// Number of masked indices in an indicator vector.
pub fn mask_ones(mask: &[bool]) -> usize {
    mask.iter().filter(|&&b| b).count()
}

/// Builds the additive perturbation matrix M: for the j-th masked column
/// with pattern +1 the column is -2 A_j (so A + M flips its sign), otherwise
/// zero.
pub fn build_perturbation(
    a: &DMatrix<f64>,
    mask: &[bool],
    pattern: &SignPattern,
) -> Result<DMatrix<f64>> {
    if mask.len() != a.ncols() {
        return Err(Error::invalid(format!(
            "mask length {} does not match {} matrix columns",
            mask.len(),
            a.ncols()
        )));
    }
    if pattern.len() != mask_ones(mask) {
        return Err(Error::invalid(format!(
            "sign pattern length {} does not match {} masked columns",
            pattern.len(),
            mask_ones(mask)
        )));
    }
    let mut m = DMatrix::zeros(a.nrows(), a.ncols());
    let mut masked_idx = 0;
    for (j, &flagged) in mask.iter().enumerate() {
        if flagged {
            if pattern.signs()[masked_idx] == 1 {
                let col = a.column(j) * -2.0;
                m.set_column(j, &col);
            }
            masked_idx += 1;
        }
    }
    Ok(m)
}

/// (A + M) computed directly as column sign flips, avoiding the intermediate
/// perturbation matrix.
pub fn apply_mask(a: &DMatrix<f64>, mask: &[bool], pattern: &SignPattern) -> Result<DMatrix<f64>> {
    if mask.len() != a.ncols() {
        return Err(Error::invalid("mask length mismatch"));
    }
    if pattern.len() != mask_ones(mask) {
        return Err(Error::invalid("sign pattern length mismatch"));
    }
    let mut masked = a.clone();
    let mut masked_idx = 0;
    for (j, &flagged) in mask.iter().enumerate() {
        if flagged {
            if pattern.signs()[masked_idx] == 1 {
                let col = -masked.column(j);
                masked.set_column(j, &col);
            }
            masked_idx += 1;
        }
    }
    Ok(masked)
}

fn push_index(symbols: &mut Vec<f64>, value: usize, amplitude: f64) -> Result<()> {
    if value >= INDEX_LIMIT {
        return Err(Error::invalid(format!(
            "value {value} does not fit in {INDEX_DIGITS} ternary digits"
        )));
    }
    let mut digits = [0usize; INDEX_DIGITS];
    let mut rem = value;
    for d in digits.iter_mut().rev() {
        *d = rem % 3;
        rem /= 3;
    }
    for d in digits {
        symbols.push(match d {
            0 => -amplitude,
            1 => 0.0,
            _ => amplitude,
        });
    }
    Ok(())
}

fn push_signs(symbols: &mut Vec<f64>, pattern: &SignPattern, amplitude: f64) {
    for &s in pattern.signs() {
        symbols.push(s as f64 * amplitude);
    }
}

/// Serializes a mask spec and its sign pattern into a length-`t` watermark.
///
/// The caller must supply a pattern whose length equals the number of masked
/// indices the spec expands to.
pub fn encode_watermark(
    spec: &MaskSpec,
    pattern: &SignPattern,
    amplitude: f64,
    t: usize,
) -> Result<Watermark> {
    if !amplitude.is_finite() || amplitude <= 0.0 {
        return Err(Error::invalid("embedding power must be positive"));
    }
    let mut symbols = Vec::with_capacity(t);
    match spec {
        MaskSpec::TimePeaks { centers, .. } => {
            if !pattern.is_empty() || !centers.is_empty() {
                if centers.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::invalid("peak centers must be strictly increasing"));
                }
                push_index(&mut symbols, centers.len(), amplitude)?;
                for &c in centers {
                    push_index(&mut symbols, c, amplitude)?;
                }
                push_signs(&mut symbols, pattern, amplitude);
            }
            // An empty mask is the all-zero watermark.
        }
        MaskSpec::FreqBand {
            lo,
            hi,
            band_embedded,
        } => {
            if lo > hi {
                return Err(Error::invalid("band lower bound exceeds upper bound"));
            }
            let band_len = hi - lo + 1;
            if pattern.len() != band_len {
                return Err(Error::invalid(format!(
                    "sign pattern length {} does not match band length {band_len}",
                    pattern.len()
                )));
            }
            if *band_embedded {
                push_index(&mut symbols, *lo, amplitude)?;
                push_index(&mut symbols, band_len, amplitude)?;
            }
            push_signs(&mut symbols, pattern, amplitude);
        }
    }
    if symbols.len() > t {
        return Err(Error::WatermarkCapacity {
            needed: symbols.len(),
            capacity: t,
        });
    }
    symbols.resize(t, 0.0);
    Ok(Watermark { values: symbols })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symbol {
    Minus,
    Zero,
    Plus,
}

struct SymbolReader<'a> {
    symbols: Vec<Symbol>,
    pos: usize,
    source: &'a Watermark,
}

impl<'a> SymbolReader<'a> {
    fn new(w: &'a Watermark, amplitude: f64) -> Result<Self> {
        let symbols = w
            .values
            .iter()
            .map(|&v| {
                if v == 0.0 {
                    Ok(Symbol::Zero)
                } else if v == amplitude {
                    Ok(Symbol::Plus)
                } else if v == -amplitude {
                    Ok(Symbol::Minus)
                } else {
                    Err(Error::WatermarkDecode(format!(
                        "symbol {v} is not in the ternary alphabet"
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SymbolReader {
            symbols,
            pos: 0,
            source: w,
        })
    }

    fn read_index(&mut self) -> Result<usize> {
        if self.pos + INDEX_DIGITS > self.symbols.len() {
            return Err(Error::WatermarkDecode("payload truncated".into()));
        }
        let mut value = 0usize;
        for _ in 0..INDEX_DIGITS {
            let digit = match self.symbols[self.pos] {
                Symbol::Minus => 0,
                Symbol::Zero => 1,
                Symbol::Plus => 2,
            };
            value = value * 3 + digit;
            self.pos += 1;
        }
        Ok(value)
    }

    fn read_signs(&mut self, count: usize) -> Result<SignPattern> {
        if self.pos + count > self.symbols.len() {
            return Err(Error::WatermarkDecode("sign payload truncated".into()));
        }
        let mut signs = Vec::with_capacity(count);
        for _ in 0..count {
            match self.symbols[self.pos] {
                Symbol::Plus => signs.push(1i8),
                Symbol::Minus => signs.push(-1i8),
                Symbol::Zero => {
                    return Err(Error::WatermarkDecode(
                        "zero symbol inside sign payload".into(),
                    ))
                }
            }
            self.pos += 1;
        }
        SignPattern::from_signs(signs)
    }

    fn expect_zero_padding(&self) -> Result<()> {
        if self.symbols[self.pos..].iter().any(|&s| s != Symbol::Zero) {
            return Err(Error::WatermarkDecode("nonzero padding".into()));
        }
        Ok(())
    }

    fn all_zero(&self) -> bool {
        self.source.is_all_zero()
    }
}

/// Inverse of [`encode_watermark`]. The watermark must already be exactly
/// ternary (run [`threshold_watermark`] first on estimates).
pub fn decode_watermark(
    w: &Watermark,
    amplitude: f64,
    ctx: &MaskContext,
) -> Result<(MaskSpec, SignPattern)> {
    if !amplitude.is_finite() || amplitude <= 0.0 {
        return Err(Error::invalid("embedding power must be positive"));
    }
    let mut reader = SymbolReader::new(w, amplitude)?;
    match ctx.mask_type {
        MaskType::Time => {
            if reader.all_zero() {
                let spec = MaskSpec::TimePeaks {
                    centers: Vec::new(),
                    half_width: ctx.half_width,
                };
                return Ok((spec, SignPattern::from_signs(Vec::new())?));
            }
            let count = reader.read_index()?;
            let mut centers = Vec::with_capacity(count);
            for _ in 0..count {
                centers.push(reader.read_index()?);
            }
            if centers.windows(2).any(|p| p[0] >= p[1]) {
                return Err(Error::WatermarkDecode(
                    "decoded peak centers are not strictly increasing".into(),
                ));
            }
            let spec = MaskSpec::TimePeaks {
                centers,
                half_width: ctx.half_width,
            };
            let mask = to_mask_vector(&spec, ctx.n)
                .map_err(|e| Error::WatermarkDecode(format!("decoded mask invalid: {e}")))?;
            let pattern = reader.read_signs(mask_ones(&mask))?;
            reader.expect_zero_padding()?;
            Ok((spec, pattern))
        }
        MaskType::Freq => {
            if reader.all_zero() {
                return Err(Error::WatermarkDecode(
                    "embedded-band watermark is all zero".into(),
                ));
            }
            let lo = reader.read_index()?;
            let len = reader.read_index()?;
            if len == 0 {
                return Err(Error::WatermarkDecode("decoded band is empty".into()));
            }
            let hi = lo + len - 1;
            if hi >= ctx.n {
                return Err(Error::WatermarkDecode(format!(
                    "decoded band [{lo}, {hi}] exceeds length {}",
                    ctx.n
                )));
            }
            let pattern = reader.read_signs(len)?;
            reader.expect_zero_padding()?;
            let spec = MaskSpec::FreqBand {
                lo,
                hi,
                band_embedded: true,
            };
            Ok((spec, pattern))
        }
        MaskType::FixedFreq => {
            let (lo, hi) = ctx.known_band.ok_or_else(|| {
                Error::invalid("fixed-band decoding needs the band bounds")
            })?;
            if lo > hi || hi >= ctx.n {
                return Err(Error::invalid("known band out of range"));
            }
            let pattern = reader.read_signs(hi - lo + 1)?;
            reader.expect_zero_padding()?;
            let spec = MaskSpec::FreqBand {
                lo,
                hi,
                band_embedded: false,
            };
            Ok((spec, pattern))
        }
    }
}

/// Maps each entry of an estimate to the nearest of {-a, 0, +a}, with ties
/// resolved toward zero.
pub fn threshold_watermark(estimate: &[f64], amplitude: f64) -> Result<Watermark> {
    if !amplitude.is_finite() || amplitude <= 0.0 {
        return Err(Error::invalid("embedding power must be positive"));
    }
    let half = amplitude / 2.0;
    let values = estimate
        .iter()
        .map(|&v| {
            if v > half {
                amplitude
            } else if v < -half {
                -amplitude
            } else {
                0.0
            }
        })
        .collect();
    Ok(Watermark { values })
}
