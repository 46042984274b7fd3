//! Single-hidden-layer perceptron: ReLU hidden units, sigmoid output, binary
//! cross-entropy, inverted dropout on the hidden layer, Adam mini-batch updates.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, DetectorModel, Parameters, TrainConfig};
use crate::error::{Error, Result};
use crate::features::FeatureVector;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    /// `hidden × input` weights.
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

/// Gradients with the same shape as [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl Gradients {
    fn zeros_like(net: &Network) -> Gradients {
        Gradients {
            w1: vec![vec![0.0; net.inputs()]; net.hidden()],
            b1: vec![0.0; net.hidden()],
            w2: vec![0.0; net.hidden()],
            b2: 0.0,
        }
    }

    /// Entries in the order w1 (row-major), b1, w2, b2.
    pub fn flatten(&self) -> Vec<f64> {
        self.w1
            .iter()
            .flatten()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(std::iter::once(&self.b2))
            .copied()
            .collect()
    }
}

/// Numerically stable binary cross-entropy of a logit.
fn bce_from_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

impl Network {
    /// Fan-in scaled uniform initialization, zero biases.
    pub fn init<R: Rng>(inputs: usize, hidden: usize, rng: &mut R) -> Network {
        let a1 = 1.0 / (inputs as f64).sqrt();
        let a2 = 1.0 / (hidden as f64).sqrt();
        let w1 = (0..hidden)
            .map(|_| (0..inputs).map(|_| rng.random_range(-a1..a1)).collect())
            .collect();
        let w2 = (0..hidden).map(|_| rng.random_range(-a2..a2)).collect();
        Network {
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: 0.0,
        }
    }

    pub fn zeros(inputs: usize, hidden: usize) -> Network {
        Network {
            w1: vec![vec![0.0; inputs]; hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    pub fn inputs(&self) -> usize {
        self.w1.first().map_or(0, Vec::len)
    }

    pub fn hidden(&self) -> usize {
        self.b1.len()
    }

    /// Hidden pre-activations, activations and output logit.
    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let pre: Vec<f64> = self
            .w1
            .iter()
            .zip(&self.b1)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect();
        let act: Vec<f64> = pre
            .iter()
            .map(|&z| z.max(0.0))
            .collect();
        let logit = self.b2 + act.iter().zip(&self.w2).map(|(h, w)| h * w).sum::<f64>();
        (pre, act, logit)
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.forward(x).2
    }

    /// Inference-time probability of `second` (no dropout).
    pub fn proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    /// Mean binary cross-entropy over a batch, dropout off.
    pub fn loss(&self, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(x, &y)| bce_from_logit(self.logit(x), y))
            .sum::<f64>()
            / xs.len() as f64
    }

    /// Backpropagated gradients of the mean binary cross-entropy, dropout off.
    pub fn gradients(&self, xs: &[Vec<f64>], ys: &[f64]) -> Gradients {
        let mut g = Gradients::zeros_like(self);
        let n = xs.len() as f64;
        for (x, &y) in xs.iter().zip(ys) {
            let (pre, act, logit) = self.forward(x);
            let d_out = sigmoid(logit) - y;
            g.b2 += d_out;
            for k in 0..self.hidden() {
                g.w2[k] += d_out * act[k];
                if pre[k] <= 0.0 {
                    continue;
                }
                let d_hidden = d_out * self.w2[k];
                g.b1[k] += d_hidden;
                for (gw, v) in g.w1[k].iter_mut().zip(x) {
                    *gw += d_hidden * v;
                }
            }
        }
        g.b2 /= n;
        g.b1.iter_mut().for_each(|v| *v /= n);
        g.w2.iter_mut().for_each(|v| *v /= n);
        g.w1.iter_mut().flatten().for_each(|v| *v /= n);
        g
    }
}

/// Trains a network on normalized inputs; deterministic given `cfg.seed`.
///
/// Parameters live in one flat buffer laid out like [`Gradients::flatten`]
/// so the inner loop never allocates.
pub fn train(xs: &[Vec<f64>], ys: &[f64], cfg: &TrainConfig) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = Network::init(xs[0].len(), cfg.hidden, &mut rng);
    let (p, h) = (init.inputs(), init.hidden());
    let (b1_at, w2_at, b2_at) = (h * p, h * p + h, h * p + 2 * h);
    let count = b2_at + 1;
    let mut theta: Vec<f64> = Vec::with_capacity(count);
    theta.extend(init.w1.iter().flatten());
    theta.extend(&init.b1);
    theta.extend(&init.w2);
    theta.push(init.b2);

    let mut m1 = vec![0.0; count];
    let mut m2 = vec![0.0; count];
    let mut grad = vec![0.0; count];
    let mut pre = vec![0.0; h];
    let mut mask = vec![0.0; h];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let keep = cfg.keep_prob;

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in chunk {
                for m in mask.iter_mut() {
                    *m = if keep >= 1.0 || rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    };
                }
                let x = &xs[i];
                let mut logit = theta[b2_at];
                for k in 0..h {
                    let row = &theta[k * p..(k + 1) * p];
                    let z = theta[b1_at + k] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                    pre[k] = z;
                    logit += z.max(0.0) * mask[k] * theta[w2_at + k];
                }
                let d_out = sigmoid(logit) - ys[i];
                grad[b2_at] += d_out;
                for k in 0..h {
                    if pre[k] <= 0.0 || mask[k] == 0.0 {
                        continue;
                    }
                    grad[w2_at + k] += d_out * pre[k] * mask[k];
                    let d_hidden = d_out * theta[w2_at + k] * mask[k];
                    grad[b1_at + k] += d_hidden;
                    for (g, v) in grad[k * p..(k + 1) * p].iter_mut().zip(x) {
                        *g += d_hidden * v;
                    }
                }
            }
            let inv = 1.0 / chunk.len() as f64;
            step += 1;
            let c1 = 1.0 - ADAM_BETA1.powi(step);
            let c2 = 1.0 - ADAM_BETA2.powi(step);
            for i in 0..count {
                let is_weight = i < b1_at || (w2_at..b2_at).contains(&i);
                let g = grad[i] * inv + if is_weight { cfg.l2 * theta[i] } else { 0.0 };
                m1[i] = ADAM_BETA1 * m1[i] + (1.0 - ADAM_BETA1) * g;
                m2[i] = ADAM_BETA2 * m2[i] + (1.0 - ADAM_BETA2) * g * g;
                theta[i] -= cfg.learning_rate * (m1[i] / c1) / ((m2[i] / c2).sqrt() + ADAM_EPS);
            }
        }
    }
    Network {
        w1: theta[..b1_at].chunks(p).map(<[f64]>::to_vec).collect(),
        b1: theta[b1_at..w2_at].to_vec(),
        w2: theta[w2_at..b2_at].to_vec(),
        b2: theta[b2_at],
    }
}

/// Gradients of a fitted MLP model on raw feature rows, normalized with the
/// model's stored statistics. Dropout is off.
pub fn mlp_gradients(model: &DetectorModel, batch: &[FeatureVector]) -> Result<Gradients> {
    let Parameters::Mlp(net) = &model.parameters else {
        return Err(Error::InvalidArgument(format!(
            "expected an mlp model, got {}",
            model.kind
        )));
    };
    let mut xs = Vec::with_capacity(batch.len());
    for row in batch {
        if row.values.len() != model.input_width {
            return Err(Error::Arity {
                expected: model.input_width,
                got: row.values.len(),
            });
        }
        let x: Vec<f64> = model.feature_indices.iter().map(|&j| row.values[j]).collect();
        xs.push(match &model.norm_stats {
            Some(s) => s.apply(&x),
            None => x,
        });
    }
    let ys: Vec<f64> = batch.iter().map(|r| r.label.target()).collect();
    Ok(net.gradients(&xs, &ys))
}
