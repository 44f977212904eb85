//! Top-2 PCA by power iteration with deflation on the covariance matrix.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::MathError;

const POWER_TOL: f64 = 1e-9;
const POWER_MAX_ITER: usize = 1000;

/// Samples projected to the top two principal components.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectedPoints {
    /// [n, 2] coordinates in component space.
    pub coords: Vec<[f64; 2]>,
    /// Covariance eigenvalues of the two components.
    pub explained_variance: [f64; 2],
    /// Orthonormal component vectors, largest-magnitude entry positive.
    pub component_vectors: [Vec<f64>; 2],
}

fn covariance(centered: &Array2<f64>) -> Array2<f64> {
    let n = centered.nrows() as f64;
    centered.t().dot(centered) / n
}

fn power_iterate(mat: &Array2<f64>, seed_stream: u64) -> (Array1<f64>, f64) {
    let d = mat.nrows();
    // deterministic pseudo-random start; orthogonal-to-eigenvector starts
    // have probability zero in floating point
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED ^ seed_stream);
    let mut v = Array1::from_shape_fn(d, |_| rng.gen::<f64>() - 0.5);
    let norm = v.dot(&v).sqrt();
    if norm > 0.0 {
        v /= norm;
    }
    for _ in 0..POWER_MAX_ITER {
        let mv = mat.dot(&v);
        let norm = mv.dot(&mv).sqrt();
        if norm == 0.0 {
            // matrix annihilates the start vector; eigenvalue 0
            return (v, 0.0);
        }
        let next = mv / norm;
        let delta = (&next - &v)
            .iter()
            .fold(0.0f64, |acc, &x| acc.max(x.abs()));
        v = next;
        if delta < POWER_TOL {
            break;
        }
    }
    let lambda = v.dot(&mat.dot(&v));
    (v, lambda)
}

fn fix_sign(v: &mut Array1<f64>) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        *v *= -1.0;
    }
}

/// Center columns and extract the top two principal components.
///
/// Components are unit-norm and mutually orthogonal; the sign convention
/// (largest-magnitude loading positive) makes plots reproducible.
pub fn pca_top2(features: &Array2<f64>) -> Result<ProjectedPoints, MathError> {
    let (n, d) = features.dim();
    if n < 3 {
        return Err(MathError::input(format!("pca needs n >= 3 rows, got {n}")));
    }
    if d < 2 {
        return Err(MathError::input(format!("pca needs d >= 2 columns, got {d}")));
    }
    let means = features.mean_axis(Axis(0)).expect("n >= 3");
    let centered = features - &means.broadcast((n, d)).unwrap();
    let cov = covariance(&centered);

    let trace: f64 = (0..d).map(|j| cov[[j, j]]).sum();
    let scale = centered.iter().map(|v| v * v).sum::<f64>() / (n * d) as f64;
    if trace <= 1e-24 * (1.0 + scale) {
        return Err(MathError::degenerate(
            "all rows equal: covariance has rank 0",
        ));
    }

    let (mut pc1, lambda1) = power_iterate(&cov, 1);
    fix_sign(&mut pc1);

    let deflated = &cov - &(outer(&pc1, &pc1) * lambda1);
    let (mut pc2, _) = power_iterate(&deflated, 2);
    // Gram-Schmidt against pc1 keeps orthogonality tight even when the
    // deflation left a small residual along pc1.
    let proj = pc2.dot(&pc1);
    pc2 = &pc2 - &(&pc1 * proj);
    let norm = pc2.dot(&pc2).sqrt();
    if norm > 1e-12 {
        pc2 /= norm;
    } else {
        // rank-1 data: fill with any unit vector orthogonal to pc1
        pc2 = orthogonal_complement(&pc1);
    }
    let lambda2 = pc2.dot(&cov.dot(&pc2));
    fix_sign(&mut pc2);
    let lambda2 = lambda2.max(0.0);

    let coords = (0..n)
        .map(|i| {
            let row = centered.row(i);
            [row.dot(&pc1), row.dot(&pc2)]
        })
        .collect();

    Ok(ProjectedPoints {
        coords,
        explained_variance: [lambda1.max(0.0), lambda2],
        component_vectors: [pc1.to_vec(), pc2.to_vec()],
    })
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let (n, m) = (a.len(), b.len());
    Array2::from_shape_fn((n, m), |(i, j)| a[i] * b[j])
}

fn orthogonal_complement(v: &Array1<f64>) -> Array1<f64> {
    let d = v.len();
    for k in 0..d {
        let mut e = Array1::zeros(d);
        e[k] = 1.0;
        let candidate = &e - &(v * v[k]);
        let norm = candidate.dot(&candidate).sqrt();
        if norm > 1e-6 {
            return candidate / norm;
        }
    }
    unreachable!("unit vector always has an orthogonal complement for d >= 2")
}
