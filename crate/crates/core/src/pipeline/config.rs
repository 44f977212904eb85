//! Run configuration: models, manifests, axes, C grid, gates, detector
//! overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::metrics::DetectorConfig;

use super::{PipelineError, StepId};

/// A pass/fail criterion: minimum AUC plus a maximum (most positive
/// allowed) assertion asymmetry evaluated at a fixed assert threshold.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GateSpec {
    pub min_auc: f64,
    pub max_asym: f64,
    pub assert_threshold: f64,
}

impl GateSpec {
    /// Step-1 pass-through criterion (non-evidential).
    pub fn passthrough() -> Self {
        GateSpec {
            min_auc: 0.65,
            max_asym: -0.20,
            assert_threshold: 0.70,
        }
    }

    /// The main gate applied to every transfer step.
    pub fn main() -> Self {
        GateSpec {
            min_auc: 0.63,
            max_asym: -0.15,
            assert_threshold: 0.70,
        }
    }

    pub fn validate(&self, name: &str) -> Result<(), PipelineError> {
        if !(self.min_auc > 0.5 && self.min_auc <= 1.0) {
            return Err(PipelineError::Config(format!(
                "{name}: min_auc {} must lie in (0.5, 1]",
                self.min_auc
            )));
        }
        if !(-1.0..=0.0).contains(&self.max_asym) {
            return Err(PipelineError::Config(format!(
                "{name}: max_asym {} must lie in [-1, 0]",
                self.max_asym
            )));
        }
        if !(self.assert_threshold > 0.0 && self.assert_threshold < 1.0) {
            return Err(PipelineError::Config(format!(
                "{name}: assert_threshold {} must lie in (0, 1)",
                self.assert_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Gates {
    pub passthrough: GateSpec,
    pub main: GateSpec,
}

impl Default for Gates {
    fn default() -> Self {
        Gates {
            passthrough: GateSpec::passthrough(),
            main: GateSpec::main(),
        }
    }
}

/// Train and fresh manifests of one frozen base.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub train_manifest: String,
    pub fresh_manifest: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Models {
    pub a: ModelSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<ModelSpec>,
}

fn default_c_grid() -> Vec<f64> {
    vec![1.0, 0.1]
}

fn default_k_folds() -> usize {
    5
}

/// Parsed and validated run configuration. Manifest paths are resolved
/// against the config file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub models: Models,
    /// Axes to evaluate; the first entry is the anchor axis used by
    /// steps 1, 2, 4 and 5.
    pub axes: Vec<String>,
    #[serde(default = "default_c_grid")]
    pub c_grid: Vec<f64>,
    #[serde(default = "default_k_folds")]
    pub k_folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub gates: Gates,
    #[serde(default)]
    pub detectors: DetectorConfig,
    /// Steps to execute, in pipeline order. Default: cv, fresh,
    /// axis_sweep, pooled when more than one layer file is present, and
    /// cross_model when model B is configured.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<StepId>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        let config: RunConfig =
            serde_json::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.axes.is_empty() {
            return Err(PipelineError::Config("axes list is empty".into()));
        }
        if self.c_grid.is_empty() {
            return Err(PipelineError::Config("c_grid is empty".into()));
        }
        if self.c_grid.iter().any(|&c| c <= 0.0 || !c.is_finite()) {
            return Err(PipelineError::Config(
                "c_grid entries must be positive and finite".into(),
            ));
        }
        if self.k_folds < 2 {
            return Err(PipelineError::Config(format!(
                "k_folds {} must be >= 2",
                self.k_folds
            )));
        }
        self.gates.passthrough.validate("gates.passthrough")?;
        self.gates.main.validate("gates.main")?;
        if let Some(steps) = &self.steps {
            if steps.is_empty() {
                return Err(PipelineError::Config("steps list is empty".into()));
            }
            if steps.contains(&StepId::CrossModel) && self.models.b.is_none() {
                return Err(PipelineError::Config(
                    "cross_model step requires models.b".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn anchor_axis(&self) -> &str {
        &self.axes[0]
    }
}
