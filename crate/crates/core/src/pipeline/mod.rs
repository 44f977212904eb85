//! The five-step falsification protocol: gate evaluation, step
//! orchestration, failure-mode classification, and the deterministic
//! verdict report.

mod config;
mod folds;
mod steps;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{load_split, DatasetError, LoadedSplit};
use crate::error::MathError;
use crate::metrics::{AsymmetryResult, CliffFlag, CliffLevel, DetectorConfig};
use crate::numerics::ProjectedPoints;

pub use config::{GateSpec, Gates, ModelSpec, Models, RunConfig};
pub use folds::stratified_kfold;
pub use steps::{
    pooled_transfer, step1_cv, step2_fresh_transfer, step3_axis_sweep, step4_pooled,
    step5_cross_model, AxisOutcome, AxisSweepResult, SkippedAxis, TransferOutput,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("failed loading {context}: {source}")]
    Dataset {
        context: String,
        source: DatasetError,
    },
    #[error("step {step:?} failed: {source}")]
    Step { step: StepId, source: MathError },
    #[error("io error: {0}")]
    Io(String),
}

/// Pipeline step identifiers, in protocol order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepId {
    Cv,
    Fresh,
    AxisSweep,
    Pooled,
    CrossModel,
}

impl StepId {
    /// Steps whose gate verdicts feed the final verdict (steps 2-5; the
    /// CV step is pass-through and never evidence).
    pub fn is_gated(self) -> bool {
        !matches!(self, StepId::Cv)
    }
}

/// Outcome of one gate evaluation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GateVerdict {
    pub passed: bool,
    pub auc_ok: bool,
    pub asym_ok: bool,
    pub degenerate_override: bool,
}

/// Evaluate the gate: AUC at or above the bar, asymmetry at or below the
/// bar, and no degeneracy override.
pub fn evaluate_gate(auc: f64, asym: &AsymmetryResult, gate: &GateSpec) -> GateVerdict {
    let auc_ok = auc >= gate.min_auc;
    let asym_ok = asym.asymmetry <= gate.max_asym;
    let degenerate_override = asym.degenerate;
    GateVerdict {
        passed: auc_ok && asym_ok && !degenerate_override,
        auc_ok,
        asym_ok,
        degenerate_override,
    }
}

/// Metrics for one regularization strength.
#[derive(Debug, Clone, Serialize)]
pub struct PerCResult {
    pub reg_c: f64,
    pub auc: f64,
    pub asymmetry: AsymmetryResult,
    pub verdict: GateVerdict,
    pub converged: bool,
}

/// One point of an asymmetry threshold sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub asymmetry: f64,
}

/// Step diagnostics: cliff flags, the sweep minimum, free-form notes.
#[derive(Debug, Clone, Default, Serialize)]
pub struct StepNotes {
    pub pass_through: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cliff: Option<CliffFlag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_sweep: Option<SweepPoint>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub messages: Vec<String>,
}

/// Per-step metrics for every C, the best C, and the gate verdict.
#[derive(Debug, Clone, Serialize)]
pub struct StepResult {
    pub step_id: StepId,
    /// Ordered by C descending.
    pub per_c_results: Vec<PerCResult>,
    pub best_c: f64,
    pub gate: GateVerdict,
    pub notes: StepNotes,
}

impl StepResult {
    /// The per-C entry of the best (AUC-maximizing) C.
    pub fn best(&self) -> &PerCResult {
        self.per_c_results
            .iter()
            .find(|p| p.reg_c == self.best_c)
            .expect("best_c always refers to a stored entry")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    None,
    SingleOutputDistribution,
    CapabilityCliff,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    OperatorSurvives,
    Falsified,
}

/// The full run record; serialized deterministically by the report
/// module.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub config: RunConfig,
    pub steps: Vec<StepResult>,
    pub axis_table: Vec<AxisOutcome>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub skipped_axes: Vec<SkippedAxis>,
    pub failure_mode: FailureMode,
    pub final_verdict: Verdict,
    pub seed: u64,
    pub tool_version: String,
}

/// Data retained for plot emission; not part of the report file.
#[derive(Debug, Clone, Default)]
pub struct PlotBundle {
    pub auc_steps: Vec<(StepId, f64)>,
    pub gate_auc: f64,
    pub axis_rows: Vec<AxisOutcome>,
    pub asym_curve: Vec<SweepPoint>,
    pub pca: Option<(ProjectedPoints, Vec<u8>)>,
}

/// Classify why the run failed, looking at the failing gated transfer
/// steps: a fresh positive-rate cliff, a chance-band transfer AUC with at
/// most a warn-level cliff, or both across steps (mixed). Runs whose
/// gated steps all passed classify as none.
pub fn classify_failure_mode(steps: &[StepResult], det: &DetectorConfig) -> FailureMode {
    let transfer_ids = [StepId::Fresh, StepId::Pooled, StepId::CrossModel];
    let failing: Vec<&StepResult> = steps
        .iter()
        .filter(|s| transfer_ids.contains(&s.step_id) && !s.gate.passed)
        .collect();
    if failing.is_empty() {
        return FailureMode::None;
    }
    let mut cliff = false;
    let mut single = false;
    for step in failing {
        let cliff_level = step.notes.cliff.map(|c| c.level).unwrap_or(CliffLevel::None);
        let auc = step.best().auc;
        if cliff_level == CliffLevel::Cliff {
            cliff = true;
        } else if auc >= det.chance_auc_band[0] && auc <= det.chance_auc_band[1] {
            single = true;
        } else {
            // gate failed without a rate cliff: no separable direction
            single = true;
        }
    }
    match (cliff, single) {
        (true, true) => FailureMode::Mixed,
        (true, false) => FailureMode::CapabilityCliff,
        (false, true) => FailureMode::SingleOutputDistribution,
        (false, false) => unreachable!("failing steps always classify"),
    }
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn load_named(base: &Path, rel: &str, context: &str) -> Result<LoadedSplit, PipelineError> {
    load_split(&resolve(base, rel)).map_err(|source| PipelineError::Dataset {
        context: context.to_string(),
        source,
    })
}

fn planned_steps(config: &RunConfig, train_a: &LoadedSplit) -> Vec<StepId> {
    let mut steps = match &config.steps {
        Some(s) => {
            let mut s = s.clone();
            s.sort();
            s.dedup();
            s
        }
        None => {
            let mut s = vec![StepId::Cv, StepId::Fresh, StepId::AxisSweep];
            if train_a.layer_tensors.len() > 1 {
                s.push(StepId::Pooled);
            }
            if config.models.b.is_some() {
                s.push(StepId::CrossModel);
            }
            s
        }
    };
    steps.sort();
    steps
}

/// Execute the configured steps in protocol order and assemble the
/// report. Later steps run even when earlier gated steps fail, so the
/// report always shows the full collapse profile.
pub fn run_pipeline(
    config: &RunConfig,
    base_dir: &Path,
) -> Result<(PipelineReport, PlotBundle), PipelineError> {
    config.validate()?;
    let anchor = config.anchor_axis().to_string();

    let train_a = load_named(base_dir, &config.models.a.train_manifest, "models.a.train")?;
    let fresh_a = load_named(base_dir, &config.models.a.fresh_manifest, "models.a.fresh")?;
    for (split, name) in [(&train_a, "train"), (&fresh_a, "fresh")] {
        if split.dataset.axis_labels(&anchor).is_none() {
            return Err(PipelineError::Config(format!(
                "anchor axis '{anchor}' missing from model A {name} labels"
            )));
        }
    }

    let steps_to_run = planned_steps(config, &train_a);

    let model_b = if steps_to_run.contains(&StepId::CrossModel) {
        let spec = config
            .models
            .b
            .as_ref()
            .ok_or_else(|| PipelineError::Config("cross_model step requires models.b".into()))?;
        let train_b = load_named(base_dir, &spec.train_manifest, "models.b.train")?;
        let fresh_b = load_named(base_dir, &spec.fresh_manifest, "models.b.fresh")?;
        Some((train_b, fresh_b))
    } else {
        None
    };

    let det = &config.detectors;
    let mut steps = Vec::new();
    let mut axis_table = Vec::new();
    let mut skipped_axes = Vec::new();
    let mut bundle = PlotBundle {
        gate_auc: config.gates.main.min_auc,
        ..PlotBundle::default()
    };

    for step_id in &steps_to_run {
        match step_id {
            StepId::Cv => {
                let result = step1_cv(
                    &train_a.dataset,
                    &anchor,
                    &config.c_grid,
                    &config.gates.passthrough,
                    config.k_folds,
                    config.seed,
                    det,
                )
                .map_err(|source| PipelineError::Step {
                    step: StepId::Cv,
                    source,
                })?;
                bundle.auc_steps.push((StepId::Cv, result.best().auc));
                steps.push(result);
            }
            StepId::Fresh => {
                let out = step2_fresh_transfer(
                    &train_a.dataset,
                    &fresh_a.dataset,
                    &anchor,
                    &config.c_grid,
                    &config.gates.main,
                    det,
                )
                .map_err(|source| PipelineError::Step {
                    step: StepId::Fresh,
                    source,
                })?;
                bundle.auc_steps.push((StepId::Fresh, out.result.best().auc));
                bundle.asym_curve = out.sweep_curve.clone();
                steps.push(out.result);
            }
            StepId::AxisSweep => {
                let sweep = step3_axis_sweep(
                    &train_a.dataset,
                    &fresh_a.dataset,
                    &config.axes,
                    &config.c_grid,
                    &config.gates,
                    config.k_folds,
                    config.seed,
                    det,
                )
                .map_err(|source| PipelineError::Step {
                    step: StepId::AxisSweep,
                    source,
                })?;
                bundle.axis_rows = sweep.axes.clone();
                axis_table = sweep.axes;
                skipped_axes = sweep.skipped;
                steps.push(sweep.step);
            }
            StepId::Pooled => {
                let out = step4_pooled(
                    &train_a,
                    &fresh_a,
                    &anchor,
                    &config.c_grid,
                    &config.gates.main,
                    det,
                )
                .map_err(|source| PipelineError::Step {
                    step: StepId::Pooled,
                    source,
                })?;
                bundle.auc_steps.push((StepId::Pooled, out.result.best().auc));
                steps.push(out.result);
            }
            StepId::CrossModel => {
                let (train_b, fresh_b) = model_b.as_ref().expect("loaded above");
                let out = step5_cross_model(
                    &train_b.dataset,
                    &fresh_b.dataset,
                    &anchor,
                    &config.c_grid,
                    &config.gates.main,
                    det,
                )
                .map_err(|source| PipelineError::Step {
                    step: StepId::CrossModel,
                    source,
                })?;
                bundle
                    .auc_steps
                    .push((StepId::CrossModel, out.result.best().auc));
                steps.push(out.result);
            }
        }
    }

    // Fig-4-style projection of the fresh features, colored by anchor label
    if let Ok(x_fresh) = fresh_a.dataset.features.to_array2() {
        if let Ok(points) = crate::numerics::pca_top2(&x_fresh) {
            let labels = fresh_a
                .dataset
                .axis_labels(&anchor)
                .expect("checked above")
                .to_vec();
            bundle.pca = Some((points, labels));
        }
    }

    let gated: Vec<&StepResult> = steps.iter().filter(|s| s.step_id.is_gated()).collect();
    let final_verdict = if !gated.is_empty() && gated.iter().all(|s| s.gate.passed) {
        Verdict::OperatorSurvives
    } else {
        Verdict::Falsified
    };
    let failure_mode = classify_failure_mode(&steps, det);

    let report = PipelineReport {
        config: config.clone(),
        steps,
        axis_table,
        skipped_axes,
        failure_mode,
        final_verdict,
        seed: config.seed,
        tool_version: TOOL_VERSION.to_string(),
    };
    Ok((report, bundle))
}
