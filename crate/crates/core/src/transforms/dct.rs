//! Orthonormal DCT-II / DCT-III pair computed through a complex FFT.
//!
//! The forward transform reorders the input into even samples ascending
//! followed by odd samples descending, runs one length-N FFT and applies a
//! quarter-sample phase twist. The inverse undoes the same steps, so the two
//! are exact transposes of each other.

use crate::error::{Error, Result};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Orthonormal DCT-II coefficients of `x`.
pub fn dct_forward(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n == 0 {
        return Err(Error::invalid("dct_forward on empty input"));
    }
    if n == 1 {
        return Ok(vec![x[0]]);
    }

    let mut buf: Vec<Complex<f64>> = Vec::with_capacity(n);
    for i in 0..n.div_ceil(2) {
        buf.push(Complex::new(x[2 * i], 0.0));
    }
    for i in (0..n / 2).rev() {
        buf.push(Complex::new(x[2 * i + 1], 0.0));
    }

    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let scale0 = (1.0 / n as f64).sqrt();
    let scale = (2.0 / n as f64).sqrt();
    let mut out = Vec::with_capacity(n);
    for (k, v) in buf.iter().enumerate() {
        let angle = -std::f64::consts::PI * k as f64 / (2.0 * n as f64);
        let twisted = v * Complex::from_polar(1.0, angle);
        let s = if k == 0 { scale0 } else { scale };
        out.push(s * twisted.re);
    }
    Ok(out)
}

/// Orthonormal DCT-III (the transpose, hence inverse, of [`dct_forward`]).
pub fn dct_inverse(coeffs: &[f64]) -> Result<Vec<f64>> {
    let n = coeffs.len();
    if n == 0 {
        return Err(Error::invalid("dct_inverse on empty input"));
    }
    if n == 1 {
        return Ok(vec![coeffs[0]]);
    }

    // Undo the orthonormal scaling to get raw DCT-II coefficients.
    let scale0 = (n as f64).sqrt();
    let scale = (n as f64 / 2.0).sqrt();
    let raw: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(k, &c)| if k == 0 { c * scale0 } else { c * scale })
        .collect();

    // Rebuild the FFT spectrum of the even/odd-reordered signal. For a real
    // signal the imaginary part at bin k is -raw[n - k].
    let mut buf: Vec<Complex<f64>> = Vec::with_capacity(n);
    buf.push(Complex::new(raw[0], 0.0));
    for k in 1..n {
        let angle = std::f64::consts::PI * k as f64 / (2.0 * n as f64);
        buf.push(Complex::new(raw[k], -raw[n - k]) * Complex::from_polar(1.0, angle));
    }

    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);

    let inv_n = 1.0 / n as f64;
    let mut out = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        out[2 * i] = buf[i].re * inv_n;
    }
    for i in 0..n / 2 {
        out[2 * i + 1] = buf[n - 1 - i].re * inv_n;
    }
    Ok(out)
}
