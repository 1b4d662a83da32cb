//! Orthonormal sparsifying and masking bases.
//!
//! Both transforms are exposed as streaming operators and as explicit
//! synthesis matrices so that sensing operators can be assembled by plain
//! matrix multiplication. Analysis and synthesis are exact transposes of
//! each other, so round trips and Parseval hold to machine precision.

mod dct;
mod dwt;

pub use dct::{dct_forward, dct_inverse};
pub use dwt::{dwt_forward, dwt_inverse};

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Selects the orthonormal basis used to sparsify or mask a signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Identity,
    Dct,
    /// Daubechies-4 wavelet with the given number of decomposition levels.
    Wavelet { levels: usize },
}

impl Basis {
    /// Checks that the basis can be applied to vectors of length `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::invalid("basis applied to empty vector"));
        }
        if let Basis::Wavelet { levels } = self {
            if *levels == 0 {
                return Err(Error::invalid("wavelet levels must be at least 1"));
            }
            if *levels >= usize::BITS as usize || !n.is_multiple_of(1usize << levels) {
                return Err(Error::invalid(format!(
                    "signal length {n} is not divisible by 2^{levels}"
                )));
            }
        }
        Ok(())
    }

    /// Analysis operator: coefficients of `x` in this basis.
    pub fn analysis(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.validate(x.len())?;
        match self {
            Basis::Identity => Ok(x.to_vec()),
            Basis::Dct => dct_forward(x),
            Basis::Wavelet { levels } => dwt_forward(x, *levels),
        }
    }

    /// Synthesis operator: reconstructs the signal from its coefficients.
    pub fn synthesis(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.validate(coeffs.len())?;
        match self {
            Basis::Identity => Ok(coeffs.to_vec()),
            Basis::Dct => dct_inverse(coeffs),
            Basis::Wavelet { levels } => dwt_inverse(coeffs, *levels),
        }
    }
}

/// Materializes the n-by-n synthesis matrix of `basis`, the matrix that maps
/// coefficients back to samples. Columns are orthonormal.
///
/// The DCT matrix is built directly from the cosine formula, which keeps it
/// independent of the FFT-based operator path; the wavelet matrix is built by
/// synthesizing unit coefficient vectors.
pub fn basis_matrix(basis: Basis, n: usize) -> Result<DMatrix<f64>> {
    basis.validate(n)?;
    match basis {
        Basis::Identity => Ok(DMatrix::identity(n, n)),
        Basis::Dct => {
            let mut phi = DMatrix::zeros(n, n);
            let scale0 = (1.0 / n as f64).sqrt();
            let scale = (2.0 / n as f64).sqrt();
            for row in 0..n {
                for col in 0..n {
                    let s = if col == 0 { scale0 } else { scale };
                    let angle =
                        std::f64::consts::PI * (2.0 * row as f64 + 1.0) * col as f64 / (2.0 * n as f64);
                    phi[(row, col)] = s * angle.cos();
                }
            }
            Ok(phi)
        }
        Basis::Wavelet { levels } => {
            let mut phi = DMatrix::zeros(n, n);
            let mut unit = vec![0.0; n];
            for col in 0..n {
                unit[col] = 1.0;
                let atom = dwt_inverse(&unit, levels)?;
                unit[col] = 0.0;
                for row in 0..n {
                    phi[(row, col)] = atom[row];
                }
            }
            Ok(phi)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
    }

    fn norm(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Slow direct evaluation of the orthonormal DCT-II, used as an oracle.
    fn dct_matrix_oracle(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut out = vec![0.0; n];
        for (k, o) in out.iter_mut().enumerate() {
            let s = if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            };
            *o = s * x
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    v * (std::f64::consts::PI * (2.0 * i as f64 + 1.0) * k as f64
                        / (2.0 * n as f64))
                        .cos()
                })
                .sum::<f64>();
        }
        out
    }

    #[test]
    fn dct_of_zeros_is_zero() {
        let out = dct_forward(&[0.0; 8]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dct_of_constant_hits_dc_bin() {
        let c = 0.7;
        let out = dct_forward(&[c; 16]).unwrap();
        assert_abs_diff_eq!(out[0], c * 4.0, epsilon = 1e-12);
        for &v in &out[1..] {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn dct_inverse_of_dc_impulse_is_constant() {
        let mut coeffs = vec![0.0; 16];
        coeffs[0] = 1.0;
        let out = dct_inverse(&coeffs).unwrap();
        for &v in &out {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn dct_matches_matrix_oracle() {
        let x = random_vec(64, 7);
        let fast = dct_forward(&x).unwrap();
        let slow = dct_matrix_oracle(&x);
        for (a, b) in fast.iter().zip(&slow) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        let back = dct_inverse(&fast).unwrap();
        for (a, b) in back.iter().zip(&x) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn dct_round_trip_both_directions() {
        let coeffs = random_vec(128, 9);
        let x = dct_inverse(&coeffs).unwrap();
        let again = dct_forward(&x).unwrap();
        for (a, b) in again.iter().zip(&coeffs) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn dct_rejects_empty_input() {
        assert!(dct_forward(&[]).is_err());
        assert!(dct_inverse(&[]).is_err());
    }

    #[test]
    fn dwt_of_zeros_is_zero() {
        let out = dwt_forward(&[0.0; 64], 3).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dwt_preserves_energy() {
        let x = random_vec(256, 11);
        let out = dwt_forward(&x, 4).unwrap();
        assert_abs_diff_eq!(norm(&out), norm(&x), epsilon = 1e-9);
    }

    #[test]
    fn dwt_perfect_reconstruction() {
        let x = random_vec(256, 13);
        let rec = dwt_inverse(&dwt_forward(&x, 4).unwrap(), 4).unwrap();
        for (a, b) in rec.iter().zip(&x) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn dwt_atom_has_unit_norm() {
        let mut coeffs = vec![0.0; 64];
        coeffs[5] = 1.0;
        let atom = dwt_inverse(&coeffs, 3).unwrap();
        assert_abs_diff_eq!(norm(&atom), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dwt_rejects_indivisible_length() {
        assert!(dwt_forward(&[0.0; 12], 3).is_err());
        assert!(dwt_inverse(&[0.0; 12], 3).is_err());
        assert!(dwt_forward(&[0.0; 16], 0).is_err());
    }

    #[test]
    fn identity_matrix_is_identity() {
        let phi = basis_matrix(Basis::Identity, 4).unwrap();
        assert_eq!(phi, DMatrix::identity(4, 4));
    }

    #[test]
    fn dct_matrix_has_orthonormal_columns() {
        let phi = basis_matrix(Basis::Dct, 32).unwrap();
        let gram = phi.transpose() * &phi;
        let id = DMatrix::identity(32, 32);
        assert!((gram - id).amax() <= 1e-10);
    }

    #[test]
    fn wavelet_matrix_matches_operator() {
        let x = random_vec(16, 17);
        let basis = Basis::Wavelet { levels: 2 };
        let phi = basis_matrix(basis, 16).unwrap();
        let coeffs = dwt_forward(&x, 2).unwrap();
        let via_matrix = &phi * nalgebra::DVector::from_column_slice(&coeffs);
        for (a, b) in via_matrix.iter().zip(&x) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn dct_matrix_matches_operator_columns() {
        let n = 32;
        let phi = basis_matrix(Basis::Dct, n).unwrap();
        let mut unit = vec![0.0; n];
        for col in 0..n {
            unit[col] = 1.0;
            let atom = dct_inverse(&unit).unwrap();
            unit[col] = 0.0;
            for row in 0..n {
                assert_abs_diff_eq!(phi[(row, col)], atom[row], epsilon = 1e-10);
            }
        }
    }

    proptest! {
        #[test]
        fn prop_dct_parseval_and_round_trip(seed in 0u64..500) {
            let n = 1 << (3 + (seed % 5) as usize);
            let x = random_vec(n, seed);
            let coeffs = dct_forward(&x).unwrap();
            prop_assert!((norm(&coeffs) - norm(&x)).abs() <= 1e-9);
            let rec = dct_inverse(&coeffs).unwrap();
            let err = rec.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-9);
        }

        #[test]
        fn prop_dwt_parseval_and_round_trip(seed in 0u64..500, levels in 1usize..5) {
            let n = 256;
            let x = random_vec(n, seed);
            let coeffs = dwt_forward(&x, levels).unwrap();
            prop_assert!((norm(&coeffs) - norm(&x)).abs() <= 1e-9);
            let rec = dwt_inverse(&coeffs, levels).unwrap();
            let err = rec.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-9);
        }
    }
}
