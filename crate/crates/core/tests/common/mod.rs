//! Shared oracles for the integration suites: independent
//! implementations used to check the library, never the library itself.

use ndarray::{Array1, Array2};

/// O(n^2) pair-counting AUC with 0.5 credit for ties.
pub fn auc_pair_oracle(scores: &[f64], labels: &[u8]) -> f64 {
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

/// Penalized logistic objective, written from the definition.
pub fn logreg_objective(x: &Array2<f64>, y: &[u8], w: &[f64], b: f64, c: f64) -> f64 {
    let mut total = w.iter().map(|v| v * v).sum::<f64>() / (2.0 * c);
    for i in 0..x.nrows() {
        let ypm = if y[i] == 1 { 1.0 } else { -1.0 };
        let z: f64 = (0..x.ncols()).map(|j| x[[i, j]] * w[j]).sum::<f64>() + b;
        let m = ypm * z;
        total += if m > 30.0 {
            (-m).exp()
        } else {
            (1.0 + (-m).exp()).ln()
        };
    }
    total
}

/// Long-run gradient descent with backtracking, restarted from several
/// points; returns the best objective value found.
pub fn logreg_multistart_oracle(x: &Array2<f64>, y: &[u8], c: f64, starts: &[Vec<f64>]) -> f64 {
    let d = x.ncols();
    let grad = |w: &[f64], b: f64| -> (Vec<f64>, f64) {
        let mut gw: Vec<f64> = w.iter().map(|v| v / c).collect();
        let mut gb = 0.0;
        for i in 0..x.nrows() {
            let ypm = if y[i] == 1 { 1.0 } else { -1.0 };
            let z: f64 = (0..d).map(|j| x[[i, j]] * w[j]).sum::<f64>() + b;
            let s = -ypm / (1.0 + (ypm * z).exp());
            for j in 0..d {
                gw[j] += s * x[[i, j]];
            }
            gb += s;
        }
        (gw, gb)
    };

    let mut best = f64::INFINITY;
    for start in starts {
        let mut w = start[..d].to_vec();
        let mut b = start[d];
        let mut f = logreg_objective(x, y, &w, b, c);
        'descent: for _ in 0..30_000 {
            let (gw, gb) = grad(&w, b);
            let gnorm = gw.iter().fold(gb.abs(), |a, v| a.max(v.abs()));
            if gnorm < 1e-10 {
                break;
            }
            let mut step = 1.0;
            loop {
                let wt: Vec<f64> = w.iter().zip(&gw).map(|(wi, gi)| wi - step * gi).collect();
                let bt = b - step * gb;
                let ft = logreg_objective(x, y, &wt, bt, c);
                if ft < f {
                    w = wt;
                    b = bt;
                    f = ft;
                    break;
                }
                step *= 0.5;
                if step < 1e-18 {
                    break 'descent;
                }
            }
        }
        best = best.min(f);
    }
    best
}

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix,
/// eigenpairs sorted by descending eigenvalue.
pub fn jacobi_eigen(mat: &Array2<f64>) -> Vec<(f64, Array1<f64>)> {
    let d = mat.nrows();
    let mut a = mat.clone();
    let mut v = Array2::<f64>::eye(d);
    for _ in 0..200 {
        let mut off = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                if a[[p, q]].abs() < 1e-18 {
                    continue;
                }
                let theta = 0.5 * (2.0 * a[[p, q]]).atan2(a[[q, q]] - a[[p, p]]);
                let (cos, sin) = (theta.cos(), theta.sin());
                for k in 0..d {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = cos * akp - sin * akq;
                    a[[k, q]] = sin * akp + cos * akq;
                }
                for k in 0..d {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = cos * apk - sin * aqk;
                    a[[q, k]] = sin * apk + cos * aqk;
                }
                for k in 0..d {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = cos * vkp - sin * vkq;
                    v[[k, q]] = sin * vkp + cos * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Array1<f64>)> =
        (0..d).map(|j| (a[[j, j]], v.column(j).to_owned())).collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    pairs
}
