//! Gaussian naive Bayes with closed-form per-class moments.

use serde::{Deserialize, Serialize};

use super::VARIANCE_FLOOR;

/// Index 0 is class `first`, index 1 is class `second`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesParams {
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    /// Maximum-likelihood variances, floored at 1e-9.
    pub variances: [Vec<f64>; 2],
}

pub fn fit(xs: &[Vec<f64>], targets: &[f64]) -> NaiveBayesParams {
    let p = xs[0].len();
    let mut counts = [0usize; 2];
    let mut sums = [vec![0.0; p], vec![0.0; p]];
    for (x, &t) in xs.iter().zip(targets) {
        let c = t as usize;
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(x) {
            *s += v;
        }
    }
    let means = [0, 1].map(|c| {
        sums[c]
            .iter()
            .map(|s| s / counts[c] as f64)
            .collect::<Vec<_>>()
    });
    let mut sq = [vec![0.0; p], vec![0.0; p]];
    for (x, &t) in xs.iter().zip(targets) {
        let c = t as usize;
        for ((s, v), m) in sq[c].iter_mut().zip(x).zip(&means[c]) {
            *s += (v - m) * (v - m);
        }
    }
    let variances = [0, 1].map(|c| {
        sq[c]
            .iter()
            .map(|s| (s / counts[c] as f64).max(VARIANCE_FLOOR))
            .collect::<Vec<_>>()
    });
    let n = xs.len() as f64;
    NaiveBayesParams {
        priors: [counts[0] as f64 / n, counts[1] as f64 / n],
        means,
        variances,
    }
}

impl NaiveBayesParams {
    fn log_joint(&self, c: usize, x: &[f64]) -> f64 {
        let mut lp = self.priors[c].ln();
        for ((v, m), var) in x.iter().zip(&self.means[c]).zip(&self.variances[c]) {
            lp -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (v - m) * (v - m) / var);
        }
        lp
    }

    pub fn proba(&self, x: &[f64]) -> f64 {
        let l0 = self.log_joint(0, x);
        let l1 = self.log_joint(1, x);
        super::sigmoid(l1 - l0)
    }
}
