//! Experiment configuration and the named presets matching the evaluated
//! measurement-rate / embedding-power / watermark-length triples.

use mlcs_core::codec::{CodecConfig, MaskMode};
use mlcs_core::solver::{EpsilonRule, SolverConfig};
use mlcs_core::{EmbedKey, SenseKey};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    Time,
    Freq,
    FixedFreq,
}

/// Solver radii as fractions of the measurement norm, plus iteration limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub user_a_epsilon: f64,
    pub pre_estimate_epsilon: f64,
    pub final_epsilon: f64,
    pub max_iterations: usize,
    pub convergence_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let defaults = CodecConfig::default();
        let fraction = |cfg: &SolverConfig| match cfg.epsilon_rule {
            EpsilonRule::RelativeToMeasurement(f) => f,
            EpsilonRule::Absolute(v) => v,
        };
        SolverSettings {
            user_a_epsilon: fraction(&defaults.user_a_solver),
            pre_estimate_epsilon: fraction(&defaults.pre_estimate_solver),
            final_epsilon: fraction(&defaults.final_solver),
            max_iterations: defaults.final_solver.max_iterations,
            convergence_tol: defaults.final_solver.convergence_tol,
        }
    }
}

/// Full experiment description: sensing dimensions, mask choice, key seeds
/// and solver settings. Serializable as JSON for `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub mask_type: MaskKind,
    pub mr: f64,
    pub embedding_power: f64,
    pub t: usize,
    pub n: usize,
    pub fs: f64,
    /// Masked coefficient band for the frequency modes.
    pub band: (usize, usize),
    pub half_width: usize,
    pub seed_a: u64,
    pub seed_b: u64,
    /// Master seed for per-signal sign patterns and synthesis.
    pub seed: u64,
    pub batch_size: usize,
    pub solver: SolverSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mask_type: MaskKind::Freq,
            mr: 0.65,
            embedding_power: 0.1,
            t: 110,
            n: 2048,
            fs: 360.0,
            band: (20, 90),
            half_width: 15,
            seed_a: 1,
            seed_b: 2,
            seed: 3,
            batch_size: 50,
            solver: SolverSettings::default(),
        }
    }
}

/// Preset rows: (name, mask kind, MR, embedding power, watermark length).
const PRESETS: [(&str, MaskKind, f64, f64, usize); 9] = [
    ("freq-0.3", MaskKind::Freq, 0.3, 0.5, 110),
    ("freq-0.5", MaskKind::Freq, 0.5, 0.2, 110),
    ("freq-0.65", MaskKind::Freq, 0.65, 0.1, 110),
    ("fixed-freq-0.3", MaskKind::FixedFreq, 0.3, 0.1, 80),
    ("fixed-freq-0.5", MaskKind::FixedFreq, 0.5, 0.2, 80),
    ("fixed-freq-0.65", MaskKind::FixedFreq, 0.65, 0.05, 80),
    ("time-0.3", MaskKind::Time, 0.3, 4.5, 500),
    ("time-0.5", MaskKind::Time, 0.5, 1.5, 500),
    ("time-0.65", MaskKind::Time, 0.65, 1.0, 500),
];

impl ExperimentConfig {
    /// Looks up a named preset.
    pub fn preset(name: &str) -> Result<Self> {
        PRESETS
            .iter()
            .find(|(preset_name, ..)| *preset_name == name)
            .map(|&(_, mask_type, mr, embedding_power, t)| ExperimentConfig {
                mask_type,
                mr,
                embedding_power,
                t,
                ..ExperimentConfig::default()
            })
            .ok_or_else(|| {
                CliError::validation(format!(
                    "unknown preset {name:?}; available: {}",
                    preset_names().join(", ")
                ))
            })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mr > 0.0 && self.mr <= 1.0) {
            return Err(CliError::validation("mr must be in (0, 1]"));
        }
        if self.t == 0 || !self.embedding_power.is_finite() || self.embedding_power <= 0.0 {
            return Err(CliError::validation(
                "watermark length and embedding power must be positive",
            ));
        }
        if self.band.0 > self.band.1 || self.band.1 >= self.n {
            return Err(CliError::validation("band out of range"));
        }
        if self.batch_size == 0 {
            return Err(CliError::validation("batch size must be positive"));
        }
        Ok(())
    }

    pub fn sense_key(&self) -> Result<SenseKey> {
        Ok(SenseKey::new(self.seed_a, self.n, self.mr)?)
    }

    pub fn embed_key(&self) -> Result<EmbedKey> {
        Ok(EmbedKey::new(self.seed_b, self.t, self.embedding_power)?)
    }

    pub fn mask_mode(&self) -> MaskMode {
        match self.mask_type {
            MaskKind::Time => MaskMode::Time,
            MaskKind::Freq => MaskMode::Freq {
                lo: self.band.0,
                hi: self.band.1,
            },
            MaskKind::FixedFreq => MaskMode::FixedFreq {
                lo: self.band.0,
                hi: self.band.1,
            },
        }
    }

    pub fn codec_config(&self) -> CodecConfig {
        let solver = |fraction: f64| SolverConfig {
            epsilon_rule: EpsilonRule::RelativeToMeasurement(fraction),
            max_iterations: self.solver.max_iterations,
            convergence_tol: self.solver.convergence_tol,
        };
        CodecConfig {
            user_a_solver: solver(self.solver.user_a_epsilon),
            pre_estimate_solver: solver(self.solver.pre_estimate_epsilon),
            final_solver: solver(self.solver.final_epsilon),
            half_width: self.half_width,
        }
    }
}

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(name, ..)| *name).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_triples_are_pinned() {
        let freq = ExperimentConfig::preset("freq-0.65").unwrap();
        assert_eq!(freq.mr, 0.65);
        assert_eq!(freq.embedding_power, 0.1);
        assert_eq!(freq.t, 110);

        let fixed = ExperimentConfig::preset("fixed-freq-0.65").unwrap();
        assert_eq!(fixed.embedding_power, 0.05);
        assert_eq!(fixed.t, 80);
        assert_eq!(fixed.band, (20, 90));

        let time = ExperimentConfig::preset("time-0.3").unwrap();
        assert_eq!(time.embedding_power, 4.5);
        assert_eq!(time.t, 500);

        assert!(ExperimentConfig::preset("freq-0.42").is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = ExperimentConfig::preset("fixed-freq-0.5").unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_json_uses_defaults() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"mask_type": "time", "mr": 0.5}"#).unwrap();
        assert_eq!(cfg.mask_type, MaskKind::Time);
        assert_eq!(cfg.n, 2048);
        assert_eq!(cfg.half_width, 15);
    }
}
