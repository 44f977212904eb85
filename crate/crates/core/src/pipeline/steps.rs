//! The five protocol steps over id-aligned probe datasets.

use ndarray::Array2;
use serde::Serialize;

use crate::dataset::{LoadedSplit, ProbeDataset};
use crate::error::MathError;
use crate::metrics::{
    assertion_asymmetry, default_threshold_grid, detect_capability_cliff,
    detect_degenerate_asymmetry, positive_rate, roc_auc, sweep_thresholds, DetectorConfig,
};
use crate::numerics::{fit_logreg, pool_layers, predict_proba, FitOptions};

use super::config::{GateSpec, Gates};
use super::folds::stratified_kfold;
use super::{evaluate_gate, GateVerdict, PerCResult, StepId, StepNotes, StepResult, SweepPoint};

/// A transfer-style step plus the threshold sweep of its best-C scores.
#[derive(Debug, Clone)]
pub struct TransferOutput {
    pub result: StepResult,
    pub sweep_curve: Vec<SweepPoint>,
}

/// One row of the per-axis sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct AxisOutcome {
    pub axis: String,
    pub cv_auc: f64,
    pub transfer_auc: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedAxis {
    pub axis: String,
    pub reason: String,
}

/// Per-axis sweep output: the table, skipped axes, the count of
/// below-chance transfer AUCs, and a summary step result.
#[derive(Debug, Clone)]
pub struct AxisSweepResult {
    pub axes: Vec<AxisOutcome>,
    pub skipped: Vec<SkippedAxis>,
    pub n_below_chance: usize,
    pub step: StepResult,
}

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    (pos, labels.len() - pos)
}

fn sorted_c_grid(c_grid: &[f64]) -> Vec<f64> {
    let mut grid = c_grid.to_vec();
    grid.sort_by(|a, b| b.partial_cmp(a).unwrap());
    grid.dedup();
    grid
}

/// Best C (AUC-maximizing, ties to the larger C) and the step gate.
/// Gate satisfaction requires one C to clear both bars; the stored
/// verdict is the passing C's when one exists, otherwise the best C's.
fn summarize(per_c: &[PerCResult]) -> (f64, GateVerdict) {
    let best = per_c
        .iter()
        .fold(None::<&PerCResult>, |acc, p| match acc {
            Some(prev) if prev.auc >= p.auc => Some(prev),
            _ => Some(p),
        })
        .expect("c grid is nonempty");
    let passing = per_c
        .iter()
        .filter(|p| p.verdict.passed)
        .fold(None::<&PerCResult>, |acc, p| match acc {
            Some(prev) if prev.auc >= p.auc => Some(prev),
            _ => Some(p),
        });
    (best.reg_c, passing.unwrap_or(best).verdict)
}

fn eval_scores(
    probs: &[f64],
    labels: &[u8],
    reg_c: f64,
    converged: bool,
    gate: &GateSpec,
    det: &DetectorConfig,
) -> Result<PerCResult, MathError> {
    let auc = roc_auc(probs, labels)?;
    let asym = assertion_asymmetry(probs, labels, gate.assert_threshold)?;
    let (n_pos, n_neg) = class_counts(labels);
    let asym = detect_degenerate_asymmetry(asym, auc, n_pos, n_neg, det);
    let verdict = evaluate_gate(auc, &asym, gate);
    Ok(PerCResult {
        reg_c,
        auc,
        asymmetry: asym,
        verdict,
        converged,
    })
}

fn axis_labels<'a>(ds: &'a ProbeDataset, axis: &str) -> Result<&'a [u8], MathError> {
    ds.axis_labels(axis)
        .ok_or_else(|| MathError::input(format!("axis '{axis}' missing from dataset labels")))
}

/// Step 1: within-distribution k-fold CV on the training set.
///
/// For each C the standardizer and probe are refit per fold, held-out
/// probabilities are pooled, and a single AUC/asymmetry pair is computed
/// over the pooled scores. Evaluated against the pass-through gate and
/// marked non-evidential.
pub fn step1_cv(
    train: &ProbeDataset,
    axis: &str,
    c_grid: &[f64],
    gate: &GateSpec,
    k: usize,
    seed: u64,
    det: &DetectorConfig,
) -> Result<StepResult, MathError> {
    let x = train
        .features
        .to_array2()
        .map_err(|e| MathError::input(e.to_string()))?;
    let y = axis_labels(train, axis)?;
    let folds = stratified_kfold(y, k, seed)?;

    let mut per_c = Vec::new();
    for &c in &sorted_c_grid(c_grid) {
        let (oof, all_converged) = cv_oof_probs(&x, y, &folds, c)?;
        per_c.push(eval_scores(&oof, y, c, all_converged, gate, det)?);
    }

    let (best_c, gate_verdict) = summarize(&per_c);
    Ok(StepResult {
        step_id: StepId::Cv,
        per_c_results: per_c,
        best_c,
        gate: gate_verdict,
        notes: StepNotes {
            pass_through: true,
            messages: vec!["pass-through step; a pass here is not evidence".to_string()],
            ..StepNotes::default()
        },
    })
}

/// Per-fold refit over the given folds, pooling held-out probabilities
/// into one score vector (slot i holds row i's out-of-fold score).
fn cv_oof_probs(
    x: &Array2<f64>,
    y: &[u8],
    folds: &[Vec<usize>],
    c: f64,
) -> Result<(Vec<f64>, bool), MathError> {
    let mut oof = vec![f64::NAN; y.len()];
    let mut all_converged = true;
    for fold in folds {
        let in_fold = |i: usize| fold.binary_search(&i).is_ok();
        let train_idx: Vec<usize> = (0..y.len()).filter(|&i| !in_fold(i)).collect();
        let x_tr = select_rows(x, &train_idx);
        let y_tr: Vec<u8> = train_idx.iter().map(|&i| y[i]).collect();
        let x_te = select_rows(x, fold);

        let model = fit_logreg(&x_tr, &y_tr, c, FitOptions::default())?;
        all_converged &= model.converged;
        let probs = predict_proba(&model, &x_te)?;
        for (slot, &i) in fold.iter().enumerate() {
            oof[i] = probs[slot];
        }
    }
    debug_assert!(oof.iter().all(|p| p.is_finite()), "folds must cover all rows");
    Ok((oof, all_converged))
}

fn select_rows(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), x.ncols()));
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).assign(&x.row(i));
    }
    out
}

fn transfer(
    step_id: StepId,
    x_train: &Array2<f64>,
    y_train: &[u8],
    x_fresh: &Array2<f64>,
    y_fresh: &[u8],
    c_grid: &[f64],
    gate: &GateSpec,
    det: &DetectorConfig,
) -> Result<TransferOutput, MathError> {
    let mut per_c = Vec::new();
    let mut best_probs: Option<(f64, Vec<f64>)> = None;
    for &c in &sorted_c_grid(c_grid) {
        let model = fit_logreg(x_train, y_train, c, FitOptions::default())?;
        let probs = predict_proba(&model, x_fresh)?.to_vec();
        let result = eval_scores(&probs, y_fresh, c, model.converged, gate, det)?;
        match &best_probs {
            Some((auc, _)) if *auc >= result.auc => {}
            _ => best_probs = Some((result.auc, probs)),
        }
        per_c.push(result);
    }
    let (best_c, gate_verdict) = summarize(&per_c);

    let cliff = detect_capability_cliff(positive_rate(y_train), positive_rate(y_fresh), det)?;
    let (_, probs) = best_probs.expect("c grid nonempty");
    let (curve, best_point) = sweep_thresholds(&probs, y_fresh, &default_threshold_grid())?;
    let sweep_curve: Vec<SweepPoint> = curve
        .iter()
        .map(|r| SweepPoint {
            threshold: r.threshold,
            asymmetry: r.asymmetry,
        })
        .collect();

    Ok(TransferOutput {
        result: StepResult {
            step_id,
            per_c_results: per_c,
            best_c,
            gate: gate_verdict,
            notes: StepNotes {
                pass_through: false,
                cliff: Some(cliff),
                best_sweep: Some(SweepPoint {
                    threshold: best_point.threshold,
                    asymmetry: best_point.asymmetry,
                }),
                messages: Vec::new(),
            },
        },
        sweep_curve,
    })
}

/// Step 2: fit on the full training split, evaluate on fresh.
pub fn step2_fresh_transfer(
    train: &ProbeDataset,
    fresh: &ProbeDataset,
    axis: &str,
    c_grid: &[f64],
    gate: &GateSpec,
    det: &DetectorConfig,
) -> Result<TransferOutput, MathError> {
    let x_train = train
        .features
        .to_array2()
        .map_err(|e| MathError::input(e.to_string()))?;
    let x_fresh = fresh
        .features
        .to_array2()
        .map_err(|e| MathError::input(e.to_string()))?;
    transfer(
        StepId::Fresh,
        &x_train,
        axis_labels(train, axis)?,
        &x_fresh,
        axis_labels(fresh, axis)?,
        c_grid,
        gate,
        det,
    )
}

/// Step 3: the per-axis sweep. Every axis gets the CV treatment and the
/// fresh transfer; axes with a single class in either split are skipped
/// and listed.
#[allow(clippy::too_many_arguments)]
pub fn step3_axis_sweep(
    train: &ProbeDataset,
    fresh: &ProbeDataset,
    axes: &[String],
    c_grid: &[f64],
    gates: &Gates,
    k: usize,
    seed: u64,
    det: &DetectorConfig,
) -> Result<AxisSweepResult, MathError> {
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let mut summary: Option<(String, TransferOutput)> = None;

    for axis in axes {
        let usable = |ds: &ProbeDataset| -> Result<(), String> {
            let labels = ds
                .axis_labels(axis)
                .ok_or_else(|| format!("axis '{axis}' missing"))?;
            let (pos, neg) = class_counts(labels);
            if pos == 0 || neg == 0 {
                return Err(format!("axis '{axis}' has a single class"));
            }
            if pos < k || neg < k {
                return Err(format!(
                    "axis '{axis}' class counts ({pos}/{neg}) below k = {k}"
                ));
            }
            Ok(())
        };
        if let Err(reason) = usable(train) {
            skipped.push(SkippedAxis {
                axis: axis.clone(),
                reason: format!("train: {reason}"),
            });
            continue;
        }
        // fresh split only needs both classes, no folds
        let fresh_labels = fresh.axis_labels(axis);
        let fresh_ok = fresh_labels
            .map(|l| {
                let (p, n) = class_counts(l);
                p > 0 && n > 0
            })
            .unwrap_or(false);
        if !fresh_ok {
            skipped.push(SkippedAxis {
                axis: axis.clone(),
                reason: "fresh: missing axis or single class".to_string(),
            });
            continue;
        }

        let cv = step1_cv(train, axis, c_grid, &gates.passthrough, k, seed, det)?;
        let tr = step2_fresh_transfer(train, fresh, axis, c_grid, &gates.main, det)?;
        rows.push(AxisOutcome {
            axis: axis.clone(),
            cv_auc: cv.best().auc,
            transfer_auc: tr.result.best().auc,
            pass: tr.result.gate.passed,
        });
        if summary.is_none() {
            summary = Some((axis.clone(), tr));
        }
    }

    let (summary_axis, summary_out) = summary.ok_or_else(|| {
        MathError::input("no axis with both classes in both splits; nothing to sweep")
    })?;
    let n_below_chance = rows.iter().filter(|r| r.transfer_auc < 0.5).count();
    let n_pass = rows.iter().filter(|r| r.pass).count();

    let mut step = summary_out.result;
    step.step_id = StepId::AxisSweep;
    step.notes.messages.push(format!(
        "{n_pass}/{} axes pass; {n_below_chance} transfer AUCs below chance; summary axis '{summary_axis}'",
        rows.len()
    ));

    Ok(AxisSweepResult {
        axes: rows,
        skipped,
        n_below_chance,
        step,
    })
}

/// Pool layer matrices for both splits, then run the transfer semantics
/// on the pooled features.
pub fn pooled_transfer(
    train_layers: &[Array2<f64>],
    y_train: &[u8],
    fresh_layers: &[Array2<f64>],
    y_fresh: &[u8],
    c_grid: &[f64],
    gate: &GateSpec,
    det: &DetectorConfig,
) -> Result<TransferOutput, MathError> {
    let x_train = pool_layers(train_layers)?;
    let x_fresh = pool_layers(fresh_layers)?;
    transfer(
        StepId::Pooled,
        &x_train,
        y_train,
        &x_fresh,
        y_fresh,
        c_grid,
        gate,
        det,
    )
}

/// Step 4: the multi-layer pooling variant over the manifest's layer
/// files.
pub fn step4_pooled(
    train: &LoadedSplit,
    fresh: &LoadedSplit,
    axis: &str,
    c_grid: &[f64],
    gate: &GateSpec,
    det: &DetectorConfig,
) -> Result<TransferOutput, MathError> {
    let to_arrays = |split: &LoadedSplit| -> Result<Vec<Array2<f64>>, MathError> {
        split
            .layer_tensors
            .iter()
            .map(|t| t.to_array2().map_err(|e| MathError::input(e.to_string())))
            .collect()
    };
    pooled_transfer(
        &to_arrays(train)?,
        axis_labels(&train.dataset, axis)?,
        &to_arrays(fresh)?,
        axis_labels(&fresh.dataset, axis)?,
        c_grid,
        gate,
        det,
    )
}

/// Step 5: replicate the anchor transfer on a second frozen base.
/// Degeneracy detection is mandatory here; flagged asymmetries are
/// excluded from gate satisfaction via the override.
pub fn step5_cross_model(
    train_b: &ProbeDataset,
    fresh_b: &ProbeDataset,
    axis: &str,
    c_grid: &[f64],
    gate: &GateSpec,
    det: &DetectorConfig,
) -> Result<TransferOutput, MathError> {
    let mut out = step2_fresh_transfer(train_b, fresh_b, axis, c_grid, gate, det)?;
    out.result.step_id = StepId::CrossModel;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{assemble_dataset, Dtype, LabelRecord, Split, Tensor};
    use crate::synth::{generate_planted, SynthConfig};
    use std::collections::BTreeMap;

    fn dataset_from(x: Array2<f64>, labels: &[u8]) -> ProbeDataset {
        let records: Vec<LabelRecord> = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let mut axes = BTreeMap::new();
                axes.insert("factual".to_string(), y);
                LabelRecord {
                    id: format!("r{i}"),
                    split: Split::Train,
                    coverage: None,
                    axis_labels: Some(axes),
                    assertive: None,
                    model: "synth".to_string(),
                }
            })
            .collect();
        let tensor = Tensor::from_array2(&x, Dtype::F64).unwrap();
        assemble_dataset(tensor, &records).unwrap()
    }

    fn planted(signal_in_fresh: bool, s: f64, seed: u64) -> (ProbeDataset, ProbeDataset) {
        let cfg = SynthConfig {
            n_train: 100,
            n_fresh: 160,
            d: 12,
            base_rate_train: 0.5,
            base_rate_fresh: 0.5,
            signal_strength: s,
            signal_in_fresh,
            closure_strength: 1.0,
            noise_sigma: 1.0,
            n_layers: 1,
            signal_layer: 0,
            n_null_axes: 0,
            seed,
        };
        let out = generate_planted(&cfg).unwrap();
        (out.train, out.fresh)
    }

    #[test]
    fn cv_on_planted_signal_passes_passthrough() {
        let (train, _) = planted(true, 3.0, 11);
        let det = DetectorConfig::default();
        let r = step1_cv(
            &train,
            "factual",
            &[1.0, 0.1],
            &GateSpec::passthrough(),
            5,
            7,
            &det,
        )
        .unwrap();
        assert!(r.best().auc > 0.9, "cv auc {}", r.best().auc);
        assert!(r.best().asymmetry.asymmetry < -0.5);
        assert!(r.gate.passed);
        assert!(r.notes.pass_through);
    }

    #[test]
    fn cv_on_permuted_labels_fails() {
        let (train, _) = planted(true, 3.0, 13);
        // destroy the signal by re-deriving labels from a shuffled copy
        let mut shuffled = train.clone();
        let labels = shuffled.labels_per_axis.get_mut("factual").unwrap();
        let n = labels.len();
        let mut rng_state = 0x9E3779B97F4A7C15u64;
        for i in (1..n).rev() {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (rng_state >> 33) as usize % (i + 1);
            labels.swap(i, j);
        }
        let det = DetectorConfig::default();
        let r = step1_cv(
            &shuffled,
            "factual",
            &[1.0],
            &GateSpec::passthrough(),
            5,
            7,
            &det,
        )
        .unwrap();
        assert!(
            (0.4..=0.6).contains(&r.best().auc),
            "permuted cv auc {}",
            r.best().auc
        );
        assert!(!r.gate.passed);
    }

    #[test]
    fn transfer_passes_when_signal_survives() {
        let (train, fresh) = planted(true, 3.0, 17);
        let det = DetectorConfig::default();
        let out = step2_fresh_transfer(&train, &fresh, "factual", &[1.0, 0.1], &GateSpec::main(), &det)
            .unwrap();
        assert!(out.result.best().auc > 0.95);
        assert!(out.result.gate.passed);
    }

    #[test]
    fn transfer_collapses_when_fresh_signal_removed() {
        let (train, fresh) = planted(false, 3.0, 19);
        let det = DetectorConfig::default();
        let out = step2_fresh_transfer(&train, &fresh, "factual", &[1.0, 0.1], &GateSpec::main(), &det)
            .unwrap();
        let auc = out.result.best().auc;
        assert!((0.4..=0.6).contains(&auc), "collapsed auc {auc}");
        assert!(!out.result.gate.passed);
    }

    #[test]
    fn transfer_on_identical_split_matches_training_metrics() {
        let (train, _) = planted(true, 2.0, 23);
        let det = DetectorConfig::default();
        let gate = GateSpec::main();
        let out = step2_fresh_transfer(&train, &train, "factual", &[1.0], &gate, &det).unwrap();

        // training-set metrics computed directly from the same fit
        let x = train.features.to_array2().unwrap();
        let y = train.axis_labels("factual").unwrap();
        let model = crate::numerics::fit_logreg(&x, y, 1.0, Default::default()).unwrap();
        let probs = crate::numerics::predict_proba(&model, &x).unwrap().to_vec();
        let train_auc = crate::metrics::roc_auc(&probs, y).unwrap();
        let train_asym = crate::metrics::assertion_asymmetry(&probs, y, gate.assert_threshold)
            .unwrap()
            .asymmetry;

        assert_eq!(out.result.best().auc, train_auc);
        assert_eq!(out.result.best().asymmetry.asymmetry, train_asym);
        assert_eq!(out.result.notes.cliff.unwrap().ratio, 1.0);
    }

    #[test]
    fn stored_verdicts_are_recomputable_from_stored_metrics() {
        let (train, fresh) = planted(true, 3.0, 41);
        let det = DetectorConfig::default();
        let gate = GateSpec::main();
        let out =
            step2_fresh_transfer(&train, &fresh, "factual", &[1.0, 0.1], &gate, &det).unwrap();
        for per_c in &out.result.per_c_results {
            let recomputed = evaluate_gate(per_c.auc, &per_c.asymmetry, &gate);
            assert_eq!(recomputed.passed, per_c.verdict.passed);
            assert_eq!(recomputed.auc_ok, per_c.verdict.auc_ok);
            assert_eq!(recomputed.asym_ok, per_c.verdict.asym_ok);
            assert_eq!(
                recomputed.degenerate_override,
                per_c.verdict.degenerate_override
            );
        }
    }

    #[test]
    fn pooled_equals_transfer_when_layers_identical() {
        let (train, fresh) = planted(true, 2.0, 29);
        let det = DetectorConfig::default();
        let x_train = train.features.to_array2().unwrap();
        let x_fresh = fresh.features.to_array2().unwrap();
        let y_train = train.axis_labels("factual").unwrap();
        let y_fresh = fresh.axis_labels("factual").unwrap();

        let direct = transfer(
            StepId::Fresh,
            &x_train,
            y_train,
            &x_fresh,
            y_fresh,
            &[1.0],
            &GateSpec::main(),
            &det,
        )
        .unwrap();
        let pooled = pooled_transfer(
            &[x_train.clone(), x_train.clone(), x_train.clone(), x_train.clone()],
            y_train,
            &[x_fresh.clone(), x_fresh.clone(), x_fresh.clone(), x_fresh.clone()],
            y_fresh,
            &[1.0],
            &GateSpec::main(),
            &det,
        )
        .unwrap();
        // pooling identical tensors reproduces the single-layer result up
        // to the exact arithmetic of (4x)/4
        assert!((direct.result.best().auc - pooled.result.best().auc).abs() < 1e-12);
    }

    #[test]
    fn axis_sweep_skips_single_class_axis() {
        let (train, fresh) = planted(true, 3.0, 31);
        let mut fresh = fresh;
        // add an axis that is all-positive on fresh and balanced on train
        let n = fresh.n;
        fresh
            .labels_per_axis
            .insert("stuck".to_string(), vec![1u8; n]);
        let mut train = train;
        let balanced: Vec<u8> = (0..train.n).map(|i| (i % 2) as u8).collect();
        train.labels_per_axis.insert("stuck".to_string(), balanced);

        let det = DetectorConfig::default();
        let sweep = step3_axis_sweep(
            &train,
            &fresh,
            &["factual".to_string(), "stuck".to_string()],
            &[1.0],
            &Gates::default(),
            5,
            7,
            &det,
        )
        .unwrap();
        assert_eq!(sweep.axes.len(), 1);
        assert_eq!(sweep.skipped.len(), 1);
        assert_eq!(sweep.skipped[0].axis, "stuck");
        assert!(sweep.axes[0].pass);
    }

    #[test]
    fn summarize_requires_same_c_to_clear_both_bars() {
        use crate::metrics::{AsymmetryResult, DegeneracyReason};
        let mk = |c: f64, auc: f64, asym: f64| {
            let a = AsymmetryResult {
                threshold: 0.7,
                p_assert_correct: 0.5,
                p_assert_wrong: 0.5 + asym,
                asymmetry: asym,
                n_correct: 50,
                n_wrong: 50,
                degenerate: false,
                degeneracy_reason: DegeneracyReason::None,
                degeneracy_reasons: Vec::new(),
            };
            let verdict = evaluate_gate(auc, &a, &GateSpec::main());
            PerCResult {
                reg_c: c,
                auc,
                asymmetry: a,
                verdict,
                converged: true,
            }
        };
        // C=1.0 clears AUC only; C=0.1 clears asymmetry only: step fails
        let per_c = vec![mk(1.0, 0.70, -0.05), mk(0.1, 0.55, -0.30)];
        let (best_c, gate) = summarize(&per_c);
        assert_eq!(best_c, 1.0);
        assert!(!gate.passed);

        // one C clears both: step passes even if the other C has best AUC
        let per_c = vec![mk(1.0, 0.70, -0.05), mk(0.1, 0.66, -0.30)];
        let (best_c, gate) = summarize(&per_c);
        assert_eq!(best_c, 1.0);
        assert!(gate.passed);
    }

    #[test]
    fn oof_pooling_is_internally_consistent() {
        // AUC recomputed from the pooled out-of-fold scores equals the
        // step's reported AUC exactly
        let (train, _) = planted(true, 3.0, 37);
        let det = DetectorConfig::default();
        let r = step1_cv(&train, "factual", &[1.0], &GateSpec::passthrough(), 5, 3, &det).unwrap();

        let x = train.features.to_array2().unwrap();
        let y = train.axis_labels("factual").unwrap();
        let folds = stratified_kfold(y, 5, 3).unwrap();
        let (oof, _) = cv_oof_probs(&x, y, &folds, 1.0).unwrap();
        let recomputed = crate::metrics::roc_auc(&oof, y).unwrap();
        assert_eq!(recomputed, r.best().auc);

        let mut covered: Vec<usize> = folds.into_iter().flatten().collect();
        covered.sort_unstable();
        assert_eq!(covered, (0..y.len()).collect::<Vec<_>>());
    }

    #[test]
    fn axis_sweep_passes_only_the_planted_axis() {
        let cfg = SynthConfig {
            n_train: 100,
            n_fresh: 160,
            signal_strength: 3.0,
            n_null_axes: 4,
            seed: 6,
            ..SynthConfig::default()
        };
        let out = generate_planted(&cfg).unwrap();
        let det = DetectorConfig::default();
        let axes: Vec<String> = out.train.axes();
        assert_eq!(axes.len(), 5);
        let sweep = step3_axis_sweep(
            &out.train,
            &out.fresh,
            &axes,
            &[1.0, 0.1],
            &Gates::default(),
            5,
            7,
            &det,
        )
        .unwrap();
        assert_eq!(sweep.axes.len(), 5);
        for row in &sweep.axes {
            assert_eq!(row.pass, row.axis == "factual", "axis {}", row.axis);
        }
        let below: usize = sweep.axes.iter().filter(|r| r.transfer_auc < 0.5).count();
        assert_eq!(sweep.n_below_chance, below);
        let _ = dataset_from(
            out.train.features.to_array2().unwrap(),
            out.train.axis_labels("factual").unwrap(),
        );
    }
}
