//! Compressive-sensing multi-level encryption for 1-D ECG signals.
//!
//! A signal is measured through a key-derived Gaussian matrix whose masked
//! columns are sign-flipped, hiding selected time samples or frequency bins
//! from semi-authorized receivers while a ternary watermark, embedded through
//! a second key-derived matrix, lets fully-authorized receivers undo the
//! mask and reconstruct the original.
//!
//! * [`transforms`] — orthonormal DCT and wavelet bases, operators and
//!   explicit matrices.
//! * [`sensing`] — deterministic key-derived matrices and the watermark
//!   annihilator.
//! * [`solver`] — l1 recovery with a quadratic constraint and least-squares
//!   estimation.
//! * [`masking`] — mask vectors, perturbation matrices and the ternary
//!   watermark code.
//! * [`codec`] — the encrypt / recover pipelines.
//! * [`ecg`] — Pan-Tompkins peak detection, segmentation and a synthetic
//!   generator.
//! * [`metrics`] — PSNR, peak precision/recall and recovery rates.

pub mod codec;
pub mod ecg;
pub mod error;
pub mod masking;
pub mod metrics;
pub mod sensing;
pub mod solver;
pub mod transforms;

pub use codec::{
    Ciphertext, CiphertextHeader, CodecConfig, Encrypted, EncryptWitness, KeyMaterial, MaskMode,
    MaskParams, RecoveryReport, FORMAT_VERSION,
};
pub use ecg::{AamiClass, AnnotatedRecord, Signal, SynthParams};
pub use error::{Error, Result};
pub use masking::{MaskContext, MaskSpec, MaskType, Watermark};
pub use sensing::{EmbedKey, SenseKey, SignPattern};
pub use solver::{BpdnSolution, EpsilonRule, SolverConfig};
pub use transforms::Basis;
