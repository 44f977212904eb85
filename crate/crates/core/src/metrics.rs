//! Measurement layer: ROC AUC, coverage labeling, assertion asymmetry
//! with threshold sweeps, the baseline 2x2 matrix, and the degeneracy and
//! capability-cliff detectors.

use serde::{Deserialize, Serialize};

use crate::error::MathError;

/// Why an asymmetry number was flagged as an artifact rather than signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegeneracyReason {
    None,
    ChanceAuc,
    TooFewPositives,
    LowBaseRate,
    ExtremeAssertRate,
}

/// Assertion asymmetry at one threshold: per-class assertion rates and
/// their difference, with artifact flags filled by
/// [`detect_degenerate_asymmetry`].
#[derive(Debug, Clone, Serialize)]
pub struct AsymmetryResult {
    pub threshold: f64,
    pub p_assert_correct: f64,
    pub p_assert_wrong: f64,
    /// p_assert_wrong - p_assert_correct; negative is the desired direction.
    pub asymmetry: f64,
    pub n_correct: usize,
    pub n_wrong: usize,
    pub degenerate: bool,
    pub degeneracy_reason: DegeneracyReason,
    /// Every detector that fired, in check order.
    pub degeneracy_reasons: Vec<DegeneracyReason>,
}

/// Counts of the correctness x delivery contingency table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TwoByTwo {
    pub correct_assertive: usize,
    pub correct_hedged: usize,
    pub wrong_assertive: usize,
    pub wrong_hedged: usize,
}

impl TwoByTwo {
    pub fn n(&self) -> usize {
        self.correct_assertive + self.correct_hedged + self.wrong_assertive + self.wrong_hedged
    }

    pub fn p_assert_correct(&self) -> f64 {
        self.correct_assertive as f64 / (self.correct_assertive + self.correct_hedged) as f64
    }

    pub fn p_assert_wrong(&self) -> f64 {
        self.wrong_assertive as f64 / (self.wrong_assertive + self.wrong_hedged) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CliffLevel {
    None,
    Warn,
    Cliff,
}

/// Fresh-vs-train positive-rate collapse indicator.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CliffFlag {
    pub train_rate: f64,
    pub fresh_rate: f64,
    pub ratio: f64,
    pub level: CliffLevel,
}

/// Detector thresholds; the defaults operationalize the artifact
/// arguments and are overridable from the run config.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub chance_auc_band: [f64; 2],
    pub min_class_count: usize,
    pub min_base_rate: f64,
    pub extreme_assert_low: f64,
    pub extreme_assert_high: f64,
    pub cliff_warn_ratio: f64,
    pub cliff_cliff_ratio: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            chance_auc_band: [0.45, 0.55],
            min_class_count: 20,
            min_base_rate: 0.10,
            extreme_assert_low: 0.05,
            extreme_assert_high: 0.95,
            cliff_warn_ratio: 0.5,
            cliff_cliff_ratio: 0.25,
        }
    }
}

fn check_binary_classes(labels: &[u8]) -> Result<(usize, usize), MathError> {
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MathError::input("both classes must be present"));
    }
    Ok((n_pos, n_neg))
}

/// ROC AUC as the Mann-Whitney statistic, computed by rank-sum with
/// average ranks for ties (O(n log n); exactly equal to pair counting
/// with 0.5 credit for tied pairs).
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64, MathError> {
    if scores.len() != labels.len() {
        return Err(MathError::input("scores/labels length mismatch"));
    }
    let (n_pos, n_neg) = check_binary_classes(labels)?;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // average 1-based rank of the tie group [i, j]
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Binarize gold-checklist coverage at the inclusive threshold tau.
pub fn coverage_to_label(coverage: f64, tau: f64) -> Result<u8, MathError> {
    if !(0.0..=1.0).contains(&coverage) || !coverage.is_finite() {
        return Err(MathError::input(format!("coverage {coverage} out of [0,1]")));
    }
    Ok(u8::from(coverage >= tau))
}

/// Per-class assertion rates at a threshold (assert iff prob >= threshold)
/// and their difference. Degeneracy flags are left unset.
pub fn assertion_asymmetry(
    probs: &[f64],
    labels: &[u8],
    threshold: f64,
) -> Result<AsymmetryResult, MathError> {
    if probs.len() != labels.len() {
        return Err(MathError::input("probs/labels length mismatch"));
    }
    let (n_pos, n_neg) = check_binary_classes(labels)?;
    let mut assert_correct = 0usize;
    let mut assert_wrong = 0usize;
    for (&p, &y) in probs.iter().zip(labels) {
        if p >= threshold {
            if y == 1 {
                assert_correct += 1;
            } else {
                assert_wrong += 1;
            }
        }
    }
    let p_assert_correct = assert_correct as f64 / n_pos as f64;
    let p_assert_wrong = assert_wrong as f64 / n_neg as f64;
    Ok(AsymmetryResult {
        threshold,
        p_assert_correct,
        p_assert_wrong,
        asymmetry: p_assert_wrong - p_assert_correct,
        n_correct: n_pos,
        n_wrong: n_neg,
        degenerate: false,
        degeneracy_reason: DegeneracyReason::None,
        degeneracy_reasons: Vec::new(),
    })
}

/// The default sweep grid: 0.02 to 0.98 in steps of 0.02 (exact fractions
/// i/50, so reported thresholds like 0.06 and 0.16 are hit exactly).
pub fn default_threshold_grid() -> Vec<f64> {
    (1..=49).map(|i| i as f64 / 50.0).collect()
}

/// Asymmetry at every grid threshold plus the most negative entry.
pub fn sweep_thresholds(
    probs: &[f64],
    labels: &[u8],
    grid: &[f64],
) -> Result<(Vec<AsymmetryResult>, AsymmetryResult), MathError> {
    if grid.is_empty() {
        return Err(MathError::input("threshold grid is empty"));
    }
    if grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(MathError::input("grid thresholds must lie in [0,1]"));
    }
    let curve: Vec<AsymmetryResult> = grid
        .iter()
        .map(|&t| assertion_asymmetry(probs, labels, t))
        .collect::<Result<_, _>>()?;
    let best = curve
        .iter()
        .min_by(|a, b| a.asymmetry.partial_cmp(&b.asymmetry).unwrap())
        .cloned()
        .expect("grid nonempty");
    Ok((curve, best))
}

/// Tally the 2x2 correctness-by-delivery matrix and the asymmetry of its
/// conditional rates.
pub fn assertion_matrix(
    correct_flags: &[bool],
    assertive_flags: &[bool],
) -> Result<(TwoByTwo, f64), MathError> {
    if correct_flags.len() != assertive_flags.len() {
        return Err(MathError::input("flag slices must have equal length"));
    }
    if correct_flags.is_empty() {
        return Err(MathError::input("empty input"));
    }
    let mut m = TwoByTwo {
        correct_assertive: 0,
        correct_hedged: 0,
        wrong_assertive: 0,
        wrong_hedged: 0,
    };
    for (&c, &a) in correct_flags.iter().zip(assertive_flags) {
        match (c, a) {
            (true, true) => m.correct_assertive += 1,
            (true, false) => m.correct_hedged += 1,
            (false, true) => m.wrong_assertive += 1,
            (false, false) => m.wrong_hedged += 1,
        }
    }
    if m.correct_assertive + m.correct_hedged == 0 || m.wrong_assertive + m.wrong_hedged == 0 {
        return Err(MathError::input(
            "both correct and wrong responses are required",
        ));
    }
    let asymmetry = m.p_assert_wrong() - m.p_assert_correct();
    Ok((m, asymmetry))
}

/// Mean of binary labels.
pub fn positive_rate(labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    labels.iter().map(|&y| y as f64).sum::<f64>() / labels.len() as f64
}

/// Compare fresh to train positive rates and grade the collapse.
pub fn detect_capability_cliff(
    train_rate: f64,
    fresh_rate: f64,
    cfg: &DetectorConfig,
) -> Result<CliffFlag, MathError> {
    if train_rate <= 0.0 {
        return Err(MathError::input("train positive rate must be > 0"));
    }
    let ratio = fresh_rate / train_rate;
    let level = if ratio < cfg.cliff_cliff_ratio {
        CliffLevel::Cliff
    } else if ratio < cfg.cliff_warn_ratio {
        CliffLevel::Warn
    } else {
        CliffLevel::None
    };
    Ok(CliffFlag {
        train_rate,
        fresh_rate,
        ratio,
        level,
    })
}

/// Fill the degeneracy flags of an asymmetry result given the matching
/// AUC and class counts. Checks run in a fixed order; the first match is
/// recorded as the primary reason and all matches are listed.
pub fn detect_degenerate_asymmetry(
    mut result: AsymmetryResult,
    auc: f64,
    n_pos: usize,
    n_neg: usize,
    cfg: &DetectorConfig,
) -> AsymmetryResult {
    let mut reasons = Vec::new();
    if auc >= cfg.chance_auc_band[0] && auc <= cfg.chance_auc_band[1] {
        reasons.push(DegeneracyReason::ChanceAuc);
    }
    if n_pos.min(n_neg) < cfg.min_class_count {
        reasons.push(DegeneracyReason::TooFewPositives);
    }
    let n = n_pos + n_neg;
    if n > 0 {
        let min_rate = n_pos.min(n_neg) as f64 / n as f64;
        if min_rate < cfg.min_base_rate {
            reasons.push(DegeneracyReason::LowBaseRate);
        }
    }
    let overall_assert = (result.p_assert_correct * result.n_correct as f64
        + result.p_assert_wrong * result.n_wrong as f64)
        / (result.n_correct + result.n_wrong) as f64;
    if overall_assert > cfg.extreme_assert_high || overall_assert < cfg.extreme_assert_low {
        reasons.push(DegeneracyReason::ExtremeAssertRate);
    }

    result.degenerate = !reasons.is_empty();
    result.degeneracy_reason = reasons.first().copied().unwrap_or(DegeneracyReason::None);
    result.degeneracy_reasons = reasons;
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// O(n^2) pair-counting oracle.
    fn auc_brute_force(scores: &[f64], labels: &[u8]) -> f64 {
        let mut num = 0.0;
        let mut pairs = 0usize;
        for (i, (&si, &yi)) in scores.iter().zip(labels).enumerate() {
            if yi != 1 {
                continue;
            }
            for (j, (&sj, &yj)) in scores.iter().zip(labels).enumerate() {
                if i == j || yj != 0 {
                    continue;
                }
                pairs += 1;
                if si > sj {
                    num += 1.0;
                } else if si == sj {
                    num += 0.5;
                }
            }
        }
        num / pairs as f64
    }

    fn seeded_instance(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<u8>) {
        loop {
            // quantized scores force plenty of ties
            let scores: Vec<f64> = (0..n).map(|_| (rng.gen::<f64>() * 10.0).round() / 10.0).collect();
            let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.gen::<f64>() < 0.4)).collect();
            let pos = labels.iter().filter(|&&y| y == 1).count();
            if pos > 0 && pos < n {
                return (scores, labels);
            }
        }
    }

    #[test]
    fn auc_perfect_separation() {
        let scores = [1.0, 1.0, 0.0, 0.0];
        let labels = [1, 1, 0, 0];
        assert_eq!(roc_auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn auc_all_ties_is_half() {
        let scores = [0.3; 6];
        let labels = [1, 0, 1, 0, 0, 1];
        assert_eq!(roc_auc(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn auc_matches_brute_force_on_seeded_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(314);
        for _ in 0..200 {
            let n = 5 + (rng.gen::<u32>() % 46) as usize;
            let (scores, labels) = seeded_instance(&mut rng, n);
            let fast = roc_auc(&scores, &labels).unwrap();
            let slow = auc_brute_force(&scores, &labels);
            assert_eq!(fast, slow, "n={n} scores={scores:?}");
        }
    }

    #[test]
    fn auc_invariant_under_monotone_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (scores, labels) = seeded_instance(&mut rng, 40);
        let base = roc_auc(&scores, &labels).unwrap();
        let exp_scores: Vec<f64> = scores.iter().map(|&s| s.exp()).collect();
        let affine: Vec<f64> = scores.iter().map(|&s| 3.0 * s + 11.0).collect();
        assert!((roc_auc(&exp_scores, &labels).unwrap() - base).abs() < 1e-12);
        assert!((roc_auc(&affine, &labels).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn auc_label_flip_complements() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (scores, labels) = seeded_instance(&mut rng, 35);
        let flipped: Vec<u8> = labels.iter().map(|&y| 1 - y).collect();
        let a = roc_auc(&scores, &labels).unwrap();
        let b = roc_auc(&scores, &flipped).unwrap();
        assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_permuted_labels_average_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(2718);
        let scores: Vec<f64> = (0..200).map(|_| rng.gen::<f64>()).collect();
        let mut labels: Vec<u8> = (0..200).map(|i| u8::from(i < 80)).collect();
        let mut total = 0.0;
        for _ in 0..100 {
            // Fisher-Yates with the seeded generator
            for i in (1..labels.len()).rev() {
                let j = (rng.gen::<u64>() % (i as u64 + 1)) as usize;
                labels.swap(i, j);
            }
            total += roc_auc(&scores, &labels).unwrap();
        }
        let mean = total / 100.0;
        assert!((0.45..=0.55).contains(&mean), "mean permuted AUC {mean}");
    }

    #[test]
    fn auc_single_class_rejected() {
        assert!(roc_auc(&[0.1, 0.2], &[1, 1]).is_err());
    }

    #[test]
    fn coverage_threshold_is_inclusive() {
        assert_eq!(coverage_to_label(0.5, 0.5).unwrap(), 1);
        assert_eq!(coverage_to_label(0.49, 0.5).unwrap(), 0);
        assert_eq!(coverage_to_label(1.0, 0.5).unwrap(), 1);
        assert!(coverage_to_label(1.2, 0.5).is_err());
    }

    #[test]
    fn asymmetry_zero_threshold_is_zero() {
        let probs = [0.2, 0.9, 0.4, 0.7];
        let labels = [0, 1, 0, 1];
        let r = assertion_asymmetry(&probs, &labels, 0.0).unwrap();
        assert_eq!(r.p_assert_correct, 1.0);
        assert_eq!(r.p_assert_wrong, 1.0);
        assert_eq!(r.asymmetry, 0.0);
    }

    #[test]
    fn asymmetry_above_max_prob_is_zero() {
        let probs = [0.2, 0.9, 0.4, 0.7];
        let labels = [0, 1, 0, 1];
        let r = assertion_asymmetry(&probs, &labels, 0.95).unwrap();
        assert_eq!(r.asymmetry, 0.0);
        assert_eq!(r.p_assert_correct, 0.0);
    }

    #[test]
    fn oracle_probe_reaches_minus_one() {
        let labels = [1u8, 0, 1, 0, 0];
        let probs: Vec<f64> = labels.iter().map(|&y| y as f64).collect();
        let r = assertion_asymmetry(&probs, &labels, 0.7).unwrap();
        assert_eq!(r.p_assert_correct, 1.0);
        assert_eq!(r.p_assert_wrong, 0.0);
        assert_eq!(r.asymmetry, -1.0);
    }

    #[test]
    fn sweep_finds_brute_force_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let probs: Vec<f64> = (0..60).map(|_| rng.gen::<f64>()).collect();
        let labels: Vec<u8> = (0..60).map(|i| u8::from(i % 3 == 0)).collect();
        let grid = default_threshold_grid();
        let (curve, best) = sweep_thresholds(&probs, &labels, &grid).unwrap();
        assert_eq!(curve.len(), 49);

        let mut brute_best = f64::INFINITY;
        for &t in &grid {
            let a = assertion_asymmetry(&probs, &labels, t).unwrap().asymmetry;
            brute_best = brute_best.min(a);
        }
        assert_eq!(best.asymmetry, brute_best);
        assert!(curve.iter().all(|r| best.asymmetry <= r.asymmetry));
    }

    #[test]
    fn sweep_on_oracle_probe_hits_minus_one_everywhere() {
        let labels = [1u8, 0, 1, 0, 0, 1, 0];
        let probs: Vec<f64> = labels.iter().map(|&y| y as f64).collect();
        let (curve, best) = sweep_thresholds(&probs, &labels, &default_threshold_grid()).unwrap();
        assert!(curve.iter().all(|r| r.asymmetry == -1.0));
        assert_eq!(best.asymmetry, -1.0);
    }

    #[test]
    fn default_grid_covers_reported_thresholds_exactly() {
        let grid = default_threshold_grid();
        assert!(grid.contains(&0.06));
        assert!(grid.contains(&0.16));
        assert_eq!(grid.len(), 49);
        assert_eq!(grid[0], 0.02);
        assert_eq!(grid[48], 0.98);
    }

    #[test]
    fn sweep_constant_probs_flat_zero() {
        let probs = [0.5; 8];
        let labels = [1, 0, 1, 0, 1, 0, 1, 0];
        let (curve, best) = sweep_thresholds(&probs, &labels, &default_threshold_grid()).unwrap();
        assert!(curve.iter().all(|r| r.asymmetry == 0.0));
        assert_eq!(best.asymmetry, 0.0);
    }

    #[test]
    fn matrix_reproduces_decoupling_counts() {
        // 53 correct-assertive, 5 correct-hedged, 38 wrong-assertive, 4 wrong-hedged
        let mut correct = Vec::new();
        let mut assertive = Vec::new();
        for (c, a, k) in [(true, true, 53), (true, false, 5), (false, true, 38), (false, false, 4)]
        {
            for _ in 0..k {
                correct.push(c);
                assertive.push(a);
            }
        }
        let (m, asym) = assertion_matrix(&correct, &assertive).unwrap();
        assert_eq!(m.n(), 100);
        assert!((m.p_assert_correct() - 0.9138).abs() < 5e-4);
        assert!((m.p_assert_wrong() - 0.9048).abs() < 5e-4);
        assert!((asym - (-0.0090)).abs() < 1e-3);
    }

    #[test]
    fn matrix_all_assertive_is_symmetric() {
        let correct = [true, false, true, false];
        let assertive = [true; 4];
        let (m, asym) = assertion_matrix(&correct, &assertive).unwrap();
        assert_eq!(m.p_assert_correct(), 1.0);
        assert_eq!(m.p_assert_wrong(), 1.0);
        assert_eq!(asym, 0.0);
    }

    #[test]
    fn matrix_perfectly_calibrated_delivery() {
        let correct = [true, true, false, false];
        let assertive = [true, true, false, false];
        let (_, asym) = assertion_matrix(&correct, &assertive).unwrap();
        assert_eq!(asym, -1.0);
    }

    #[test]
    fn positive_rates_match_reported_fractions() {
        let mut labels = vec![1u8; 55];
        labels.extend(vec![0u8; 138]);
        assert!((positive_rate(&labels) - 0.285).abs() < 5e-4);

        let mut labels = vec![1u8; 9];
        labels.extend(vec![0u8; 184]);
        assert!((positive_rate(&labels) - 0.047).abs() < 5e-4);

        assert_eq!(positive_rate(&[0, 0, 0]), 0.0);
    }

    #[test]
    fn cliff_levels() {
        let cfg = DetectorConfig::default();
        let cliff = detect_capability_cliff(0.56, 0.047, &cfg).unwrap();
        assert_eq!(cliff.level, CliffLevel::Cliff);

        let warn = detect_capability_cliff(0.58, 0.285, &cfg).unwrap();
        assert_eq!(warn.level, CliffLevel::Warn);

        let none = detect_capability_cliff(0.5, 0.5, &cfg).unwrap();
        assert_eq!(none.level, CliffLevel::None);

        assert!(detect_capability_cliff(0.0, 0.5, &cfg).is_err());
    }

    #[test]
    fn degeneracy_flags_fire_in_order() {
        let cfg = DetectorConfig::default();
        let base = AsymmetryResult {
            threshold: 0.16,
            p_assert_correct: 1.0,
            p_assert_wrong: 0.812,
            asymmetry: -0.188,
            n_correct: 9,
            n_wrong: 184,
            degenerate: false,
            degeneracy_reason: DegeneracyReason::None,
            degeneracy_reasons: Vec::new(),
        };
        let r = detect_degenerate_asymmetry(base, 0.519, 9, 184, &cfg);
        assert!(r.degenerate);
        assert_eq!(r.degeneracy_reason, DegeneracyReason::ChanceAuc);
        assert!(r.degeneracy_reasons.contains(&DegeneracyReason::TooFewPositives));
        assert!(r.degeneracy_reasons.contains(&DegeneracyReason::LowBaseRate));
    }

    #[test]
    fn healthy_result_is_not_degenerate() {
        let cfg = DetectorConfig::default();
        let base = AsymmetryResult {
            threshold: 0.7,
            p_assert_correct: 0.8,
            p_assert_wrong: 0.4,
            asymmetry: -0.4,
            n_correct: 50,
            n_wrong: 50,
            degenerate: false,
            degeneracy_reason: DegeneracyReason::None,
            degeneracy_reasons: Vec::new(),
        };
        let r = detect_degenerate_asymmetry(base, 0.80, 50, 50, &cfg);
        assert!(!r.degenerate);
        assert_eq!(r.degeneracy_reason, DegeneracyReason::None);
    }

    #[test]
    fn chance_auc_exactly_half_is_degenerate() {
        let cfg = DetectorConfig::default();
        let base = AsymmetryResult {
            threshold: 0.7,
            p_assert_correct: 0.5,
            p_assert_wrong: 0.5,
            asymmetry: 0.0,
            n_correct: 50,
            n_wrong: 50,
            degenerate: false,
            degeneracy_reason: DegeneracyReason::None,
            degeneracy_reasons: Vec::new(),
        };
        let r = detect_degenerate_asymmetry(base, 0.50, 50, 50, &cfg);
        assert!(r.degenerate);
        assert_eq!(r.degeneracy_reason, DegeneracyReason::ChanceAuc);
    }
}
