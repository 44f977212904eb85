//! L2-regularized logistic regression fitted by a deterministic
//! full-batch quasi-Newton scheme (L-BFGS with Armijo backtracking).
//!
//! The objective is J(w, b) = ||w||^2 / (2 c) + sum_i log(1 + exp(-y_i (w.x_i + b)))
//! with y in {-1, +1} and an unpenalized intercept. Raw features are
//! standardized internally; the statistics are stored in the model and
//! reused for every later prediction.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::error::MathError;

use super::{apply_standardizer, fit_standardizer, labels_to_pm, Standardizer};

const LBFGS_MEMORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// A fitted probe: standardizer statistics plus logistic weights for one
/// (axis, C) combination.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeModel {
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub reg_c: f64,
    pub converged: bool,
    pub final_grad_norm: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Convergence threshold on the gradient max-norm.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(-m)) without overflow.
fn logistic_loss(margin: f64) -> f64 {
    if margin > 0.0 {
        (-margin).exp().ln_1p()
    } else {
        -margin + margin.exp().ln_1p()
    }
}

/// Objective and gradient of the penalized logistic loss at (w, b) on an
/// already-standardized matrix. Labels are +/-1.
pub fn objective_and_gradient(
    x: &Array2<f64>,
    y_pm: &Array1<f64>,
    w: &Array1<f64>,
    b: f64,
    reg_c: f64,
) -> (f64, Array1<f64>, f64) {
    let margins = x.dot(w) + b;
    let mut obj = w.dot(w) / (2.0 * reg_c);
    // dJ/dmargin_i scaled by y_i
    let mut residual = Array1::<f64>::zeros(x.nrows());
    for i in 0..x.nrows() {
        let m = y_pm[i] * margins[i];
        obj += logistic_loss(m);
        residual[i] = -y_pm[i] * sigmoid(-m);
    }
    let grad_w = x.t().dot(&residual) + &(w / reg_c);
    let grad_b = residual.sum();
    (obj, grad_w, grad_b)
}

struct Packed {
    theta: Array1<f64>,
}

impl Packed {
    fn w(&self, d: usize) -> Array1<f64> {
        self.theta.slice(ndarray::s![..d]).to_owned()
    }
    fn b(&self, d: usize) -> f64 {
        self.theta[d]
    }
}

fn eval(x: &Array2<f64>, y: &Array1<f64>, p: &Packed, c: f64) -> (f64, Array1<f64>) {
    let d = x.ncols();
    let (obj, gw, gb) = objective_and_gradient(x, y, &p.w(d), p.b(d), c);
    let mut g = Array1::zeros(d + 1);
    g.slice_mut(ndarray::s![..d]).assign(&gw);
    g[d] = gb;
    (obj, g)
}

fn max_norm(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()))
}

/// Fit the probe on raw features: standardize, then minimize the
/// penalized logistic objective until the gradient max-norm drops below
/// `opts.tol` or `opts.max_iter` iterations elapse.
pub fn fit_logreg(
    features: &Array2<f64>,
    labels: &[u8],
    reg_c: f64,
    opts: FitOptions,
) -> Result<ProbeModel, MathError> {
    fit_logreg_traced(features, labels, reg_c, opts).map(|(m, _)| m)
}

/// As [`fit_logreg`], also returning the objective value after every
/// accepted step (diagnostic; the sequence is non-increasing).
pub fn fit_logreg_traced(
    features: &Array2<f64>,
    labels: &[u8],
    reg_c: f64,
    opts: FitOptions,
) -> Result<(ProbeModel, Vec<f64>), MathError> {
    if reg_c <= 0.0 {
        return Err(MathError::input(format!("reg_c must be positive, got {reg_c}")));
    }
    if features.nrows() != labels.len() {
        return Err(MathError::input(format!(
            "{} feature rows vs {} labels",
            features.nrows(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(MathError::input(
            "both classes must be present to fit a probe",
        ));
    }

    let standardizer = fit_standardizer(features)?;
    let x = apply_standardizer(&standardizer, features)?;
    let y = labels_to_pm(labels);
    let d = x.ncols();

    let mut p = Packed {
        theta: Array1::zeros(d + 1),
    };
    let (mut obj, mut grad) = eval(&x, &y, &p, reg_c);
    let mut trace = vec![obj];
    let mut history: Vec<(Array1<f64>, Array1<f64>, f64)> = Vec::new(); // (s, y, rho)
    let mut converged = false;

    for iter in 0..opts.max_iter {
        if !obj.is_finite() {
            return Err(MathError::numerics("non-finite loss during optimization"));
        }
        if max_norm(&grad) <= opts.tol {
            converged = true;
            break;
        }

        // two-loop recursion
        let mut dir = grad.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, yv, rho) in history.iter().rev() {
            let a = rho * s.dot(&dir);
            dir -= &(yv * a);
            alphas.push(a);
        }
        if let Some((s, yv, _)) = history.last() {
            let gamma = s.dot(yv) / yv.dot(yv);
            dir *= gamma;
        }
        for ((s, yv, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
            let beta = rho * yv.dot(&dir);
            dir += &(s * (a - beta));
        }
        dir *= -1.0;

        let mut slope = grad.dot(&dir);
        if slope >= 0.0 {
            dir = -grad.clone();
            slope = grad.dot(&dir);
        }

        let mut alpha = if iter == 0 {
            1.0 / max_norm(&grad).max(1.0)
        } else {
            1.0
        };
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let trial = Packed {
                theta: &p.theta + &(&dir * alpha),
            };
            let (trial_obj, trial_grad) = eval(&x, &y, &trial, reg_c);
            if trial_obj.is_finite() && trial_obj <= obj + ARMIJO_C1 * alpha * slope {
                let step = &trial.theta - &p.theta;
                let grad_diff = &trial_grad - &grad;
                let sy = step.dot(&grad_diff);
                if sy > 1e-12 * step.dot(&step).sqrt() * grad_diff.dot(&grad_diff).sqrt() {
                    if history.len() == LBFGS_MEMORY {
                        history.remove(0);
                    }
                    history.push((step, grad_diff, 1.0 / sy));
                }
                p = trial;
                obj = trial_obj;
                grad = trial_grad;
                trace.push(obj);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // line search exhausted at numerical precision
            break;
        }
    }
    if !converged && max_norm(&grad) <= opts.tol {
        converged = true;
    }

    let model = ProbeModel {
        weights: p.theta.iter().take(d).copied().collect(),
        intercept: p.theta[d],
        reg_c,
        converged,
        final_grad_norm: max_norm(&grad),
        standardizer,
    };
    Ok((model, trace))
}

/// Class-1 probabilities sigma(w.x' + b) with x' standardized by the
/// model's stored statistics.
pub fn predict_proba(model: &ProbeModel, features: &Array2<f64>) -> Result<Array1<f64>, MathError> {
    let x = apply_standardizer(&model.standardizer, features)?;
    let w = Array1::from_vec(model.weights.clone());
    let margins = x.dot(&w) + model.intercept;
    Ok(margins.mapv(|z| sigmoid(z).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)))
}
