//! Command-line layer: experiment configuration, file formats and the
//! evaluation harness on top of `mlcs-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use commands::{cmd_decrypt, cmd_encrypt, cmd_evaluate, cmd_synth, RecoveryLevel, SynthArgs};
pub use config::{preset_names, ExperimentConfig, MaskKind, SolverSettings};
pub use error::{CliError, Result};
