use serde::{Deserialize, Serialize};

use super::gbdt::{check_training_data, sigmoid};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn predict_scores(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.weights.len() {
            return Err(Error::Dimension {
                sample_id: "<matrix>".into(),
                source_id: "<logreg>".into(),
                expected: self.weights.len(),
                actual: x.cols(),
            });
        }
        Ok((0..x.rows())
            .map(|i| sigmoid(self.intercept + dot(&self.weights, x.row(i))))
            .collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean log-loss plus `l2/2 · |w|²` (intercept unpenalized), with its
/// gradient; `params` is the weights followed by the intercept.
pub fn logreg_objective(x: &Matrix, y: &[u8], l2: f64, params: &[f64]) -> (f64, Vec<f64>) {
    let d = x.cols();
    let (w, b) = (&params[..d], params[d]);
    let n = x.rows() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; d + 1];
    for i in 0..x.rows() {
        let row = x.row(i);
        let m = b + dot(w, row);
        let t = y[i] as f64;
        loss += m.max(0.0) - m * t + (-m.abs()).exp().ln_1p();
        let r = sigmoid(m) - t;
        for (g, v) in grad[..d].iter_mut().zip(row) {
            *g += r * v;
        }
        grad[d] += r;
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    loss += 0.5 * l2 * dot(w, w);
    for (g, wi) in grad[..d].iter_mut().zip(w) {
        *g += l2 * wi;
    }
    (loss, grad)
}

/// Gradient descent with backtracking (Armijo) line search from the origin.
pub fn train_logreg(
    x: &Matrix,
    y: &[u8],
    l2: f64,
    max_iters: usize,
    tol: f64,
) -> Result<LogisticModel> {
    check_training_data(x, y)?;
    if !(l2 >= 0.0) {
        return Err(Error::Validation(format!("l2 must be non-negative, got {l2}")));
    }
    let d = x.cols();
    let mut params = vec![0.0; d + 1];
    let (mut loss, mut grad) = logreg_objective(x, y, l2, &params);
    let mut step: f64 = 1.0;
    for iter in 0..max_iters {
        let gnorm2 = dot(&grad, &grad);
        if gnorm2.sqrt() < tol {
            return Ok(LogisticModel {
                weights: params[..d].to_vec(),
                intercept: params[d],
                iterations: iter,
            });
        }
        step = (step * 2.0).min(1e6);
        loop {
            let trial: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            let (tl, tg) = logreg_objective(x, y, l2, &trial);
            if tl <= loss - 0.5 * step * gnorm2 {
                params = trial;
                loss = tl;
                grad = tg;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return Err(Error::NonConvergence {
                    iters: iter,
                    grad_norm: gnorm2.sqrt(),
                });
            }
        }
    }
    let gnorm = dot(&grad, &grad).sqrt();
    if gnorm < tol {
        return Ok(LogisticModel {
            weights: params[..d].to_vec(),
            intercept: params[d],
            iterations: max_iters,
        });
    }
    Err(Error::NonConvergence {
        iters: max_iters,
        grad_norm: gnorm,
    })
}
