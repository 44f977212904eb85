//! Numerical core: standardization, regularized logistic regression,
//! layer pooling, effect sizes, cosine similarity, and top-2 PCA.

mod logreg;
mod pca;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::MathError;

pub use logreg::{fit_logreg, objective_and_gradient, predict_proba, FitOptions, ProbeModel};
pub use pca::{pca_top2, ProjectedPoints};

/// Per-column centering/scaling statistics, fitted on the training split
/// only and reused verbatim on fresh data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub d: usize,
}

/// Fit column means and population standard deviations.
///
/// Constant columns are recorded with std 0; [`apply_standardizer`] maps
/// them to 0 instead of dividing by zero.
pub fn fit_standardizer(features: &Array2<f64>) -> Result<Standardizer, MathError> {
    let n = features.nrows();
    if n < 2 {
        return Err(MathError::input(format!(
            "standardizer needs n >= 2 rows, got {n}"
        )));
    }
    let d = features.ncols();
    let means: Vec<f64> = features
        .mean_axis(Axis(0))
        .expect("n >= 2")
        .iter()
        .copied()
        .collect();
    let mut stds = Vec::with_capacity(d);
    for j in 0..d {
        let col = features.column(j);
        let m = means[j];
        let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        stds.push(var.sqrt());
    }
    Ok(Standardizer { means, stds, d })
}

/// Transform columns to (x - mean) / std; zero-std columns map to 0.
pub fn apply_standardizer(
    std: &Standardizer,
    features: &Array2<f64>,
) -> Result<Array2<f64>, MathError> {
    if features.ncols() != std.d {
        return Err(MathError::input(format!(
            "feature width {} does not match standardizer width {}",
            features.ncols(),
            std.d
        )));
    }
    let mut out = features.clone();
    for j in 0..std.d {
        let (m, s) = (std.means[j], std.stds[j]);
        for v in out.column_mut(j) {
            *v = if s == 0.0 { 0.0 } else { (*v - m) / s };
        }
    }
    Ok(out)
}

/// Elementwise arithmetic mean of equally shaped feature matrices.
pub fn pool_layers(layers: &[Array2<f64>]) -> Result<Array2<f64>, MathError> {
    let first = layers
        .first()
        .ok_or_else(|| MathError::input("pool_layers needs at least one tensor"))?;
    for l in layers {
        if l.dim() != first.dim() {
            return Err(MathError::input(format!(
                "layer shape {:?} differs from {:?}",
                l.dim(),
                first.dim()
            )));
        }
    }
    let mut acc = Array2::<f64>::zeros(first.dim());
    for l in layers {
        acc += l;
    }
    acc /= layers.len() as f64;
    Ok(acc)
}

/// Standardized mean difference between two groups.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EffectSize {
    pub d: f64,
    /// True when the pooled spread is zero while the means differ; `d`
    /// then carries a signed infinity sentinel.
    pub zero_spread: bool,
}

/// Cohen's d with pooled sample (n-1) variance: (mean(a) - mean(b)) / s_pooled.
pub fn cohens_d(group_a: &[f64], group_b: &[f64]) -> Result<EffectSize, MathError> {
    if group_a.len() < 2 || group_b.len() < 2 {
        return Err(MathError::input(format!(
            "cohens_d needs >= 2 samples per group, got {} and {}",
            group_a.len(),
            group_b.len()
        )));
    }
    let (na, nb) = (group_a.len() as f64, group_b.len() as f64);
    let mean = |g: &[f64]| g.iter().sum::<f64>() / g.len() as f64;
    let (ma, mb) = (mean(group_a), mean(group_b));
    let ss = |g: &[f64], m: f64| g.iter().map(|&v| (v - m) * (v - m)).sum::<f64>();
    let pooled_var = (ss(group_a, ma) + ss(group_b, mb)) / (na + nb - 2.0);
    let s = pooled_var.sqrt();
    let diff = ma - mb;
    if s == 0.0 {
        if diff == 0.0 {
            return Ok(EffectSize {
                d: 0.0,
                zero_spread: false,
            });
        }
        return Ok(EffectSize {
            d: diff.signum() * f64::INFINITY,
            zero_spread: true,
        });
    }
    Ok(EffectSize {
        d: diff / s,
        zero_spread: false,
    })
}

/// Cosine similarity, clamped to [-1, 1] against rounding.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, MathError> {
    if u.len() != v.len() {
        return Err(MathError::input(format!(
            "cosine length mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let norm = |x: &[f64]| x.iter().map(|&v| v * v).sum::<f64>().sqrt();
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(MathError::input("cosine of zero vector"));
    }
    let dot: f64 = u.iter().zip(v).map(|(&a, &b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

pub(crate) fn labels_to_pm(labels: &[u8]) -> Array1<f64> {
    labels.iter().map(|&y| if y == 1 { 1.0 } else { -1.0 }).collect()
}
