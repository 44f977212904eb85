//! Per-head cohort attribution over cached head activations: magnitude
//! and directional methods, the collinearity variance-artifact
//! diagnostic, and tempering-plan emission.

use ndarray::{Array1, Array3};
use serde::Serialize;

use crate::error::MathError;
use crate::numerics::{cohens_d, cosine};

/// Target site tag for emitted tempering plans; interventions damp head
/// inputs at the attention output projection.
pub const TEMPERING_TARGET: &str = "attention-output-projection-input";

/// Per-sample, per-head activations at the generation-final token with
/// correctness flags.
#[derive(Debug, Clone)]
pub struct HeadActivations {
    acts: Array3<f64>,
    labels: Vec<u8>,
    tags: Option<Vec<(usize, usize)>>,
}

impl HeadActivations {
    pub fn new(
        acts: Array3<f64>,
        labels: Vec<u8>,
        tags: Option<Vec<(usize, usize)>>,
    ) -> Result<Self, MathError> {
        let (n, h, _) = acts.dim();
        if n != labels.len() {
            return Err(MathError::input(format!(
                "{n} activation rows vs {} labels",
                labels.len()
            )));
        }
        if h == 0 {
            return Err(MathError::input("at least one head required"));
        }
        if let Some(t) = &tags {
            if t.len() != h {
                return Err(MathError::input(format!(
                    "{} head tags vs {h} heads",
                    t.len()
                )));
            }
        }
        if acts.iter().any(|v| !v.is_finite()) {
            return Err(MathError::input("non-finite activation value"));
        }
        Ok(HeadActivations { acts, labels, tags })
    }

    pub fn acts(&self) -> &Array3<f64> {
        &self.acts
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn n_heads(&self) -> usize {
        self.acts.dim().1
    }

    fn cohorts(&self) -> (Vec<usize>, Vec<usize>) {
        let mut correct = Vec::new();
        let mut wrong = Vec::new();
        for (i, &y) in self.labels.iter().enumerate() {
            if y == 1 {
                correct.push(i);
            } else {
                wrong.push(i);
            }
        }
        (correct, wrong)
    }
}

/// Attribution statistics for one head.
#[derive(Debug, Clone, Serialize)]
pub struct HeadScore {
    pub head: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tag: Option<(usize, usize)>,
    /// Mean activation L2 norm over the correct cohort.
    pub mu_cr_norm: f64,
    /// Mean activation L2 norm over the wrong cohort.
    pub mu_cw_norm: f64,
    /// |mu_cw_norm - mu_cr_norm|.
    pub magnitude_score: f64,
    /// Cohort mean difference vector (wrong minus correct).
    pub direction: Vec<f64>,
    /// Cohen's d of sample projections onto the normalized direction.
    pub d: f64,
    /// Cosine between the cohort mean vectors.
    pub cos_means: f64,
    pub variance_artifact: bool,
    /// Identical cohort means: no direction to project onto, d set to 0.
    pub zero_direction: bool,
}

/// Thresholds for the variance-artifact flag; the d bar sits below the
/// reported range to catch borderline cases, both overridable.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ArtifactThresholds {
    pub min_cos: f64,
    pub min_abs_d: f64,
}

impl Default for ArtifactThresholds {
    fn default() -> Self {
        ArtifactThresholds {
            min_cos: 0.96,
            min_abs_d: 1.0,
        }
    }
}

/// True when the cohort means are nearly collinear while the projected
/// effect size is large: the d is inflated by a tiny low-variance
/// offset, not a separable axis.
pub fn flag_variance_artifact(score: &HeadScore, thresholds: &ArtifactThresholds) -> bool {
    score.cos_means >= thresholds.min_cos && score.d.abs() > thresholds.min_abs_d
}

fn head_rows(acts: &Array3<f64>, head: usize, rows: &[usize]) -> Vec<Array1<f64>> {
    rows.iter()
        .map(|&i| acts.slice(ndarray::s![i, head, ..]).to_owned())
        .collect()
}

fn mean_vec(vecs: &[Array1<f64>]) -> Array1<f64> {
    let mut acc = Array1::<f64>::zeros(vecs[0].len());
    for v in vecs {
        acc += v;
    }
    acc / vecs.len() as f64
}

fn mean_norm(vecs: &[Array1<f64>]) -> f64 {
    vecs.iter().map(|v| v.dot(v).sqrt()).sum::<f64>() / vecs.len() as f64
}

fn score_heads(
    head_acts: &HeadActivations,
    thresholds: &ArtifactThresholds,
    need_direction: bool,
) -> Result<Vec<HeadScore>, MathError> {
    let (correct, wrong) = head_acts.cohorts();
    if correct.is_empty() || wrong.is_empty() {
        return Err(MathError::input("both cohorts must be nonempty"));
    }
    if need_direction && (correct.len() < 2 || wrong.len() < 2) {
        return Err(MathError::input(
            "directional attribution needs >= 2 samples per cohort",
        ));
    }

    let mut scores = Vec::with_capacity(head_acts.n_heads());
    for head in 0..head_acts.n_heads() {
        let cr = head_rows(&head_acts.acts, head, &correct);
        let cw = head_rows(&head_acts.acts, head, &wrong);
        let mu_cr_norm = mean_norm(&cr);
        let mu_cw_norm = mean_norm(&cw);

        let mu_cr = mean_vec(&cr);
        let mu_cw = mean_vec(&cw);
        let direction = &mu_cw - &mu_cr;
        let dir_norm = direction.dot(&direction).sqrt();

        let (d, cos_means, zero_direction) = if !need_direction {
            (0.0, 0.0, false)
        } else if dir_norm == 0.0 {
            (0.0, 1.0, true)
        } else {
            let unit = &direction / dir_norm;
            let proj = |vecs: &[Array1<f64>]| -> Vec<f64> {
                vecs.iter().map(|v| v.dot(&unit)).collect()
            };
            let effect = cohens_d(&proj(&cw), &proj(&cr))?;
            let cos = cosine(mu_cr.as_slice().unwrap(), mu_cw.as_slice().unwrap()).unwrap_or(0.0);
            (effect.d, cos, false)
        };

        let mut score = HeadScore {
            head,
            tag: head_acts.tags.as_ref().map(|t| t[head]),
            mu_cr_norm,
            mu_cw_norm,
            magnitude_score: (mu_cw_norm - mu_cr_norm).abs(),
            direction: direction.to_vec(),
            d,
            cos_means,
            variance_artifact: false,
            zero_direction,
        };
        score.variance_artifact = !zero_direction && flag_variance_artifact(&score, thresholds);
        scores.push(score);
    }
    Ok(scores)
}

/// Rank heads by the absolute cohort-mean L2-norm difference, descending,
/// ties broken by head index.
pub fn magnitude_attribution(head_acts: &HeadActivations) -> Result<Vec<HeadScore>, MathError> {
    let mut scores = score_heads(head_acts, &ArtifactThresholds::default(), false)?;
    scores.sort_by(|a, b| {
        b.magnitude_score
            .partial_cmp(&a.magnitude_score)
            .unwrap()
            .then(a.head.cmp(&b.head))
    });
    Ok(scores)
}

/// Rank heads by |Cohen's d| of projections onto the cohort mean
/// difference direction, descending, with the variance-artifact flag set
/// from the cohort-mean collinearity.
pub fn directional_attribution(
    head_acts: &HeadActivations,
    thresholds: &ArtifactThresholds,
) -> Result<Vec<HeadScore>, MathError> {
    let mut scores = score_heads(head_acts, thresholds, true)?;
    scores.sort_by(|a, b| {
        b.d.abs()
            .partial_cmp(&a.d.abs())
            .unwrap()
            .then(a.head.cmp(&b.head))
    });
    Ok(scores)
}

/// The ranked intervention configuration induced by an attribution.
#[derive(Debug, Clone, Serialize)]
pub struct TemperingPlan {
    pub target_module: String,
    /// Top-k heads, strongest first, as (layer, head) tags when known.
    pub heads: Vec<(usize, usize)>,
    pub lambdas: Vec<f64>,
    pub attribution_method: String,
    pub generated_from: String,
}

/// Select the top-k heads of a ranking and pair them with a lambda grid.
/// Plan emission only; executing the damping inside a forward pass is out
/// of scope here.
pub fn emit_tempering_plan(
    ranked: &[HeadScore],
    k: usize,
    lambdas: &[f64],
    method: &str,
    generated_from: &str,
) -> Result<TemperingPlan, MathError> {
    if k > ranked.len() {
        return Err(MathError::input(format!(
            "k = {k} exceeds {} ranked heads",
            ranked.len()
        )));
    }
    if lambdas.iter().any(|&l| !(l > 0.0 && l < 1.0)) {
        return Err(MathError::input("every lambda must lie in (0, 1)"));
    }
    let heads = ranked[..k]
        .iter()
        .map(|s| s.tag.unwrap_or((0, s.head)))
        .collect();
    Ok(TemperingPlan {
        target_module: TEMPERING_TARGET.to_string(),
        heads,
        lambdas: lambdas.to_vec(),
        attribution_method: method.to_string(),
        generated_from: generated_from.to_string(),
    })
}
