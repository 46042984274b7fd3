//! L2-regularized logistic regression fitted by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::{sigmoid, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticParams {
    pub fn zeros(p: usize) -> LogisticParams {
        LogisticParams {
            weights: vec![0.0; p],
            bias: 0.0,
        }
    }

    pub fn proba(&self, x: &[f64]) -> f64 {
        let z: f64 = self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        sigmoid(z)
    }
}

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub params: LogisticParams,
    /// Objective value before each update, then after the last one.
    pub losses: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Mean binary cross-entropy plus `l2 / 2 * |w|^2`.
pub fn objective(p: &LogisticParams, xs: &[Vec<f64>], ys: &[f64], l2: f64) -> f64 {
    let n = xs.len() as f64;
    let mut loss = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let q = p.proba(x).clamp(1e-15, 1.0 - 1e-15);
        loss -= y * q.ln() + (1.0 - y) * (1.0 - q).ln();
    }
    loss / n + 0.5 * l2 * p.weights.iter().map(|w| w * w).sum::<f64>()
}

/// Gradient-norm tolerance for stopping.
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

pub fn fit(xs: &[Vec<f64>], ys: &[f64], cfg: &TrainConfig) -> LogisticFit {
    let p = xs[0].len();
    let n = xs.len() as f64;
    let mut params = LogisticParams::zeros(p);
    let mut losses = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut grad = vec![0.0; p];
    while iterations < cfg.gd_max_iter {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let q = params.proba(x);
            let qc = q.clamp(1e-15, 1.0 - 1e-15);
            loss -= y * qc.ln() + (1.0 - y) * (1.0 - qc).ln();
            let r = q - y;
            grad_b += r;
            for (g, v) in grad.iter_mut().zip(x) {
                *g += r * v;
            }
        }
        losses.push(loss / n + 0.5 * cfg.l2 * params.weights.iter().map(|w| w * w).sum::<f64>());
        grad_b /= n;
        for (g, w) in grad.iter_mut().zip(&params.weights) {
            *g = *g / n + cfg.l2 * w;
        }
        let norm = (grad_b * grad_b + grad.iter().map(|g| g * g).sum::<f64>()).sqrt();
        if norm < GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
        for (w, g) in params.weights.iter_mut().zip(&grad) {
            *w -= cfg.gd_learning_rate * g;
        }
        params.bias -= cfg.gd_learning_rate * grad_b;
        iterations += 1;
    }
    losses.push(objective(&params, xs, ys, cfg.l2));
    LogisticFit {
        params,
        losses,
        iterations,
        converged,
    }
}
