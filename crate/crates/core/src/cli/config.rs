use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Task;
use crate::embedding::Regularization;
use crate::predictor::{BatchPolicy, TrainingConfig};
use crate::tessellate::{CandidateParams, Mode};
use crate::transfer::{ApInterpolation, CentroidWindow, DEFAULT_BUDGET, DEFAULT_IOU_THRESHOLDS};

pub const RUN_CONFIG_VERSION: u32 = 1;

/// Tunable parameters shared by all subcommands. Every field has a default,
/// so an empty JSON object is a complete config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    pub task: Option<Task>,
    pub mode: Mode,
    pub top_k: usize,
    pub rel_threshold: f64,
    pub budget: f64,
    pub iou_thresholds: Vec<f64>,
    pub ap_interpolation: ApInterpolation,
    pub centroid_window: CentroidWindow,
    /// Shortest detection interval kept, in ground-truth interval units.
    pub min_len: f64,
    pub pca_dim: Option<usize>,
    pub svs_dim: usize,
    /// Fraction of the largest cross-covariance singular value used as λ.
    pub lambda_scale: f64,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub batch: BatchPolicy,
    pub seed: u64,
    /// Parallel query workers; `None` uses every available core.
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let training = TrainingConfig::default();
        let candidates = CandidateParams::default();
        Self {
            format_version: RUN_CONFIG_VERSION,
            task: None,
            mode: Mode::Viterbi,
            top_k: candidates.r_prime,
            rel_threshold: candidates.rel_threshold,
            budget: DEFAULT_BUDGET,
            iou_thresholds: DEFAULT_IOU_THRESHOLDS.to_vec(),
            ap_interpolation: ApInterpolation::default(),
            centroid_window: CentroidWindow::default(),
            min_len: 0.0,
            pca_dim: None,
            svs_dim: crate::embedding::DEFAULT_SVS_DIM,
            lambda_scale: 0.1,
            hidden: training.hidden,
            epochs: training.epochs,
            learning_rate: training.learning_rate,
            clip_norm: training.clip_norm,
            batch: training.batch,
            seed: training.seed,
            workers: None,
        }
    }
}

/// Problems with a config file or flag values; reported as usage errors.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn candidate_params(&self) -> CandidateParams {
        CandidateParams {
            r_prime: self.top_k,
            rel_threshold: self.rel_threshold,
        }
    }

    pub fn training_config(&self) -> TrainingConfig {
        TrainingConfig {
            hidden: self.hidden,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch: self.batch,
            clip_norm: self.clip_norm,
            seed: self.seed,
        }
    }

    pub fn regularization(&self) -> Regularization {
        Regularization::CrossCovarianceScale(self.lambda_scale)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.format_version != RUN_CONFIG_VERSION {
            return bad(format!(
                "config format_version {} is not supported (expected {RUN_CONFIG_VERSION})",
                self.format_version
            ));
        }
        self.candidate_params()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.training_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.budget) {
            return bad(format!("budget {} outside [0, 1]", self.budget));
        }
        if self.iou_thresholds.is_empty() || self.iou_thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return bad("iou_thresholds must be a non-empty list of values in (0, 1)".into());
        }
        if !(self.min_len >= 0.0 && self.min_len.is_finite()) {
            return bad("min_len must be finite and non-negative".into());
        }
        if self.pca_dim == Some(0) || self.svs_dim == 0 {
            return bad("pca_dim and svs_dim must be positive".into());
        }
        if !(self.lambda_scale >= 0.0 && self.lambda_scale.is_finite()) {
            return bad("lambda_scale must be finite and non-negative".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Reads a JSON config. Unknown keys are rejected; missing keys take their
/// defaults.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let config = read_config(path)?;
    config.validate()?;
    Ok(config)
}

/// Parses without validating, so command-line flags can still override
/// values before the check.
pub(crate) fn read_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let config: RunConfig = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.display().to_string(),
        source,
    })?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.top_k, 5);
        assert_eq!(c.budget, 0.15);
        assert_eq!(c.iou_thresholds, vec![0.1, 0.2, 0.3, 0.4, 0.5]);
        c.validate().unwrap();
    }

    #[test]
    fn dump_and_load_round_trip() {
        let c = RunConfig {
            task: Some(Task::Detect),
            mode: Mode::Supervised,
            workers: Some(3),
            centroid_window: CentroidWindow::ThreeRows,
            ..RunConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, c.to_json()).unwrap();
        assert_eq!(load_config(&p).unwrap(), c);
    }

    #[test]
    fn unknown_keys_and_bad_values() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"topk": 5}"#).is_err());
        let c: RunConfig = serde_json::from_str(r#"{"rel_threshold": 1.5}"#).unwrap();
        assert!(c.validate().is_err());
        let c: RunConfig = serde_json::from_str(r#"{"iou_thresholds": []}"#).unwrap();
        assert!(c.validate().is_err());
        let c: RunConfig = serde_json::from_str(r#"{"format_version": 9}"#).unwrap();
        assert!(c.validate().is_err());
    }
}
