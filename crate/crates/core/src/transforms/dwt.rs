//! Multi-level Daubechies-4 wavelet transform with periodic boundary
//! handling. Periodization keeps the transform exactly orthogonal, so the
//! inverse is the transpose and both Parseval and perfect reconstruction
//! hold to rounding error.
//!
//! Coefficient layout is the usual pyramid: the final approximation block
//! first, then detail blocks from coarsest to finest.

use crate::error::{Error, Result};

/// Daubechies-4 scaling filter (8 taps, 4 vanishing moments).
const SCALING: [f64; 8] = [
    0.230_377_813_308_855_23,
    0.714_846_570_552_541_5,
    0.630_880_767_929_590_4,
    -0.027_983_769_416_983_85,
    -0.187_034_811_718_881_14,
    0.030_841_381_835_986_965,
    0.032_883_011_666_982_945,
    -0.010_597_401_784_997_278,
];

/// Scaling filter renormalized to unit l2 norm, so orthogonality holds to
/// machine precision rather than to the precision of the tabulated values.
fn scaling_filter() -> [f64; 8] {
    let norm = SCALING.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut h = SCALING;
    for v in &mut h {
        *v /= norm;
    }
    h
}

/// Quadrature mirror: g[t] = (-1)^t h[L-1-t].
fn wavelet_filter(h: &[f64; 8]) -> [f64; 8] {
    let mut g = [0.0; 8];
    for (t, slot) in g.iter_mut().enumerate() {
        let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
        *slot = sign * h[h.len() - 1 - t];
    }
    g
}

fn check_length(n: usize, levels: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("wavelet transform on empty input"));
    }
    if levels == 0 {
        return Err(Error::invalid("wavelet levels must be at least 1"));
    }
    if levels >= usize::BITS as usize || !n.is_multiple_of(1usize << levels) {
        return Err(Error::invalid(format!(
            "signal length {n} is not divisible by 2^{levels}"
        )));
    }
    Ok(())
}

/// Forward multi-level wavelet decomposition. Output has the same length as
/// the input.
pub fn dwt_forward(x: &[f64], levels: usize) -> Result<Vec<f64>> {
    check_length(x.len(), levels)?;
    let h = scaling_filter();
    let g = wavelet_filter(&h);
    let mut out = x.to_vec();
    let mut scratch = vec![0.0; x.len()];
    let mut len = x.len();
    for _ in 0..levels {
        let half = len / 2;
        for k in 0..half {
            let mut approx = 0.0;
            let mut detail = 0.0;
            for t in 0..h.len() {
                let idx = (2 * k + t) % len;
                approx += h[t] * out[idx];
                detail += g[t] * out[idx];
            }
            scratch[k] = approx;
            scratch[half + k] = detail;
        }
        out[..len].copy_from_slice(&scratch[..len]);
        len = half;
    }
    Ok(out)
}

/// Inverse of [`dwt_forward`] (the transpose of the analysis operator).
pub fn dwt_inverse(coeffs: &[f64], levels: usize) -> Result<Vec<f64>> {
    check_length(coeffs.len(), levels)?;
    let h = scaling_filter();
    let g = wavelet_filter(&h);
    let mut out = coeffs.to_vec();
    let mut scratch = vec![0.0; coeffs.len()];
    let mut len = coeffs.len() >> levels;
    for _ in 0..levels {
        let double = len * 2;
        scratch[..double].fill(0.0);
        for k in 0..len {
            let approx = out[k];
            let detail = out[len + k];
            for t in 0..h.len() {
                let idx = (2 * k + t) % double;
                scratch[idx] += h[t] * approx + g[t] * detail;
            }
        }
        out[..double].copy_from_slice(&scratch[..double]);
        len = double;
    }
    Ok(out)
}
