//! Deterministic generation of key-derived matrices.
//!
//! Every object here is a pure function of its seed and dimensions. Entries
//! are drawn from ChaCha8 in row-major order, so the same key regenerates an
//! identical matrix on every platform with the pinned dependency set.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Key material for the measurement matrix A.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SenseKey {
    pub seed_a: u64,
    /// Signal length N in samples.
    pub n: usize,
    /// Measurement rate in (0, 1].
    pub mr: f64,
}

impl SenseKey {
    pub fn new(seed_a: u64, n: usize, mr: f64) -> Result<Self> {
        let key = SenseKey { seed_a, n, mr };
        let m = key.measurement_count();
        if n == 0 || !(mr > 0.0 && mr <= 1.0) || m == 0 {
            return Err(Error::invalid(format!(
                "sense key needs n >= 1 and mr in (0,1] with floor(mr*n) >= 1, got n={n}, mr={mr}"
            )));
        }
        Ok(key)
    }

    /// Derived measurement count m = floor(mr * n).
    pub fn measurement_count(&self) -> usize {
        (self.mr * self.n as f64).floor() as usize
    }

    /// The m-by-n measurement matrix A for this key.
    pub fn measurement_matrix(&self) -> DMatrix<f64> {
        gen_gaussian_matrix(self.seed_a, self.measurement_count(), self.n)
            .expect("validated dimensions")
    }
}

/// Key material for the watermark embedding matrix B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbedKey {
    pub seed_b: u64,
    /// Watermark length T.
    pub t: usize,
    /// Embedding power: amplitude of watermark symbols.
    pub a: f64,
}

impl EmbedKey {
    pub fn new(seed_b: u64, t: usize, a: f64) -> Result<Self> {
        if t == 0 || !a.is_finite() || a <= 0.0 {
            return Err(Error::invalid(format!(
                "embed key needs t >= 1 and a > 0, got t={t}, a={a}"
            )));
        }
        Ok(EmbedKey { seed_b, t, a })
    }

    /// The m-by-t embedding matrix B for this key. Requires t < m.
    pub fn embedding_matrix(&self, m: usize) -> Result<DMatrix<f64>> {
        if self.t >= m {
            return Err(Error::invalid(format!(
                "watermark length {} must be smaller than measurement count {m}",
                self.t
            )));
        }
        gen_gaussian_matrix(self.seed_b, m, self.t)
    }
}

/// A +/-1 pattern, one entry per masked column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignPattern {
    signs: Vec<i8>,
}

impl SignPattern {
    pub fn from_signs(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::invalid("sign pattern entries must be +1 or -1"));
        }
        Ok(SignPattern { signs })
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }
}

/// Zero-mean Gaussian matrix with entry variance 1/rows, deterministic per
/// seed. The 1/rows normalization makes E||Ax||^2 = ||x||^2, so epsilon
/// selection downstream is scale-free.
pub fn gen_gaussian_matrix(seed: u64, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!(
            "gaussian matrix dimensions must be positive, got {rows}x{cols}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = 1.0 / (rows as f64).sqrt();
    let mut mat = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let z: f64 = rng.sample(StandardNormal);
            mat[(r, c)] = sigma * z;
        }
    }
    Ok(mat)
}

/// Fair +/-1 Bernoulli pattern, deterministic per seed.
pub fn gen_sign_pattern(seed: u64, len: usize) -> SignPattern {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signs = (0..len)
        .map(|_| if rng.random::<bool>() { 1i8 } else { -1i8 })
        .collect();
    SignPattern { signs }
}

/// Left annihilator of a full-column-rank m-by-t matrix: the (m-t)-by-m
/// matrix F with orthonormal rows spanning the orthogonal complement of
/// range(B), so F*B = 0.
///
/// Built from a Householder QR of [B | I]: the trailing m-t columns of Q
/// complete an orthonormal basis once the first t reflections have
/// triangularized B.
pub fn annihilator(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, t) = b.shape();
    if t == 0 || t >= m {
        return Err(Error::invalid(format!(
            "annihilator needs 0 < cols < rows, got {m}x{t}"
        )));
    }

    let mut augmented = DMatrix::zeros(m, t + m);
    augmented.view_mut((0, 0), (m, t)).copy_from(b);
    augmented
        .view_mut((0, t), (m, m))
        .copy_from(&DMatrix::identity(m, m));

    let qr = augmented.qr();
    let r = qr.r();
    let lead = r[(0, 0)].abs();
    let tol = f64::EPSILON * m.max(t) as f64 * lead.max(1.0);
    for i in 0..t {
        if r[(i, i)].abs() <= tol {
            return Err(Error::RankDeficient(format!(
                "column {i} of the embedding matrix is linearly dependent"
            )));
        }
    }

    let q = qr.q();
    Ok(q.columns(t, m - t).transpose())
}
