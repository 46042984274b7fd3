//! Second-attempt detectors behind a common fit/predict contract.
//!
//! Every feature-based detector z-scores its inputs with statistics taken from
//! the training rows only; the statistics travel with the fitted model.

pub mod logistic;
pub mod mlp;
pub mod naive_bayes;
pub mod ratio;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureVector, Label};

pub use mlp::mlp_gradients;
pub use ratio::ratio_score;

pub const MODEL_FORMAT_VERSION: u32 = 1;
/// Floor for variances and normalization SDs.
pub const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    NaiveBayes,
    Logistic,
    Mlp,
    Ratio,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 4] = [
        DetectorKind::NaiveBayes,
        DetectorKind::Logistic,
        DetectorKind::Mlp,
        DetectorKind::Ratio,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            DetectorKind::NaiveBayes => "Naive Bayes",
            DetectorKind::Logistic => "Logistic",
            DetectorKind::Mlp => "Multilayer Perceptron",
            DetectorKind::Ratio => "Ratio",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectorKind::NaiveBayes => "naive_bayes",
            DetectorKind::Logistic => "logistic",
            DetectorKind::Mlp => "mlp",
            DetectorKind::Ratio => "ratio",
        })
    }
}

impl FromStr for DetectorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<DetectorKind> {
        match s {
            "naive_bayes" | "nb" | "bayes" => Ok(DetectorKind::NaiveBayes),
            "logistic" => Ok(DetectorKind::Logistic),
            "mlp" => Ok(DetectorKind::Mlp),
            "ratio" | "baseline" => Ok(DetectorKind::Ratio),
            other => Err(Error::InvalidArgument(format!("unknown detector {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// MLP passes over the training set.
    pub epochs: usize,
    /// Probability of keeping an MLP hidden unit during training.
    pub keep_prob: f64,
    /// Adam step size for the MLP.
    pub learning_rate: f64,
    pub batch_size: usize,
    /// L2 penalty on logistic and MLP weights (biases are not penalized).
    pub l2: f64,
    pub seed: u64,
    /// Decision threshold on the predicted probability of `second`.
    pub threshold: f64,
    pub hidden: usize,
    /// Step size of the logistic full-batch gradient descent.
    pub gd_learning_rate: f64,
    pub gd_max_iter: usize,
    /// Fixed ratio-baseline threshold; fitted on training F1 when absent.
    pub ratio_threshold: Option<f64>,
    /// Z-score inputs with training statistics.
    pub normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            keep_prob: 0.7,
            learning_rate: 1e-3,
            batch_size: 16,
            l2: 1e-2,
            seed: 0,
            threshold: 0.5,
            hidden: 13,
            gd_learning_rate: 0.1,
            gd_max_iter: 5000,
            ratio_threshold: None,
            normalize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return bad("keep_prob must be in (0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.gd_learning_rate > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.batch_size == 0 || self.hidden == 0 || self.epochs == 0 {
            return bad("epochs, batch_size and hidden must be positive");
        }
        if !(self.l2 >= 0.0) {
            return bad("l2 must be nonnegative");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must be in (0, 1)");
        }
        Ok(())
    }
}

/// Per-feature z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl NormStats {
    pub fn fit(rows: &[Vec<f64>]) -> NormStats {
        let p = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut mean = vec![0.0; p];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut sd = vec![0.0; p];
        for r in rows {
            for ((s, v), m) in sd.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        sd.iter_mut()
            .for_each(|s| *s = (*s / n).sqrt().max(VARIANCE_FLOOR));
        NormStats { mean, sd }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameters {
    NaiveBayes(naive_bayes::NaiveBayesParams),
    Logistic(logistic::LogisticParams),
    Mlp(mlp::Network),
    Ratio { threshold: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub format_version: u32,
    pub kind: DetectorKind,
    /// Names of the input features, in model input order.
    pub feature_names: Vec<String>,
    /// Positions of those features within a full feature vector.
    pub feature_indices: Vec<usize>,
    /// Length of the full feature vector the model was trained against.
    pub input_width: usize,
    pub norm_stats: Option<NormStats>,
    pub parameters: Parameters,
    pub config: TrainConfig,
    pub seed: u64,
}

/// Selected feature columns of `m` for the given rows.
fn design_matrix(m: &FeatureMatrix, indices: &[usize]) -> Result<Vec<Vec<f64>>> {
    m.rows
        .iter()
        .enumerate()
        .map(|(r, row)| {
            indices
                .iter()
                .map(|&j| {
                    let v = row.values[j];
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::NonFinite {
                            row: r,
                            column: m.feature_names[j].clone(),
                        })
                    }
                })
                .collect()
        })
        .collect()
}

pub fn fit(kind: DetectorKind, m: &FeatureMatrix, cfg: &TrainConfig) -> Result<DetectorModel> {
    cfg.validate()?;
    if m.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "training needs at least 2 rows, got {}",
            m.len()
        )));
    }
    let targets: Vec<f64> = m.rows.iter().map(|r| r.label.target()).collect();
    if targets.iter().all(|&t| t == targets[0]) {
        return Err(Error::SingleClass);
    }
    let input_width = m.feature_names.len();

    if kind == DetectorKind::Ratio {
        let threshold = ratio::fit_threshold(m, cfg)?;
        return Ok(DetectorModel {
            format_version: MODEL_FORMAT_VERSION,
            kind,
            feature_names: Vec::new(),
            feature_indices: Vec::new(),
            input_width,
            norm_stats: None,
            parameters: Parameters::Ratio { threshold },
            config: cfg.clone(),
            seed: cfg.seed,
        });
    }

    let indices = m.selected_indices();
    if indices.is_empty() {
        return Err(Error::InvalidArgument("no features selected".into()));
    }
    let raw = design_matrix(m, &indices)?;
    let (norm_stats, xs) = if cfg.normalize {
        let stats = NormStats::fit(&raw);
        let xs = raw.iter().map(|r| stats.apply(r)).collect();
        (Some(stats), xs)
    } else {
        (None, raw)
    };
    let parameters = match kind {
        DetectorKind::NaiveBayes => Parameters::NaiveBayes(naive_bayes::fit(&xs, &targets)),
        DetectorKind::Logistic => Parameters::Logistic(logistic::fit(&xs, &targets, cfg).params),
        DetectorKind::Mlp => Parameters::Mlp(mlp::train(&xs, &targets, cfg)),
        DetectorKind::Ratio => unreachable!(),
    };
    Ok(DetectorModel {
        format_version: MODEL_FORMAT_VERSION,
        kind,
        feature_names: indices.iter().map(|&j| m.feature_names[j].clone()).collect(),
        feature_indices: indices,
        input_width,
        norm_stats,
        parameters,
        config: cfg.clone(),
        seed: cfg.seed,
    })
}

impl DetectorModel {
    /// Probability on already-selected, unnormalized inputs.
    pub fn proba_selected(&self, inputs: &[f64]) -> Result<f64> {
        if inputs.len() != self.feature_indices.len() {
            return Err(Error::Arity {
                expected: self.feature_indices.len(),
                got: inputs.len(),
            });
        }
        let x = match &self.norm_stats {
            Some(s) => s.apply(inputs),
            None => inputs.to_vec(),
        };
        Ok(match &self.parameters {
            Parameters::NaiveBayes(p) => p.proba(&x),
            Parameters::Logistic(p) => p.proba(&x),
            Parameters::Mlp(net) => net.proba(&x),
            Parameters::Ratio { .. } => {
                return Err(Error::InvalidArgument(
                    "ratio model scores sessions, not feature inputs".into(),
                ))
            }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<DetectorModel> {
        let m: DetectorModel = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model format_version {}",
                m.format_version
            )));
        }
        Ok(m)
    }
}

/// Probability that `row` is a second attempt.
pub fn predict_proba(m: &DetectorModel, row: &FeatureVector) -> Result<f64> {
    if row.values.len() != m.input_width {
        return Err(Error::Arity {
            expected: m.input_width,
            got: row.values.len(),
        });
    }
    if let Parameters::Ratio { threshold } = m.parameters {
        let r = row.ratio.ok_or_else(|| {
            Error::InsufficientData(format!("no latency ratio for {}", row.session_id))
        })?;
        return Ok(ratio::ratio_proba(r, threshold));
    }
    let inputs: Vec<f64> = m.feature_indices.iter().map(|&j| row.values[j]).collect();
    m.proba_selected(&inputs)
}

pub fn predict(m: &DetectorModel, row: &FeatureVector) -> Result<Label> {
    Ok(label_for(predict_proba(m, row)?, m.config.threshold))
}

pub fn label_for(proba: f64, threshold: f64) -> Label {
    if proba >= threshold {
        Label::Second
    } else {
        Label::First
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Variant;

    pub(crate) fn matrix(xs: &[Vec<f64>], labels: &[Label]) -> FeatureMatrix {
        let p = xs[0].len();
        FeatureMatrix {
            rows: xs
                .iter()
                .zip(labels)
                .enumerate()
                .map(|(i, (x, &label))| FeatureVector {
                    session_id: format!("r{i:03}"),
                    label,
                    values: x.clone(),
                    ratio: None,
                })
                .collect(),
            feature_names: (0..p).map(|j| format!("x{j}")).collect(),
            selected: vec![true; p],
            variant: Variant::Unpruned,
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let m = matrix(&[vec![1.0], vec![2.0]], &[Label::First, Label::First]);
        for kind in [DetectorKind::NaiveBayes, DetectorKind::Logistic, DetectorKind::Mlp] {
            assert!(matches!(
                fit(kind, &m, &TrainConfig::default()),
                Err(Error::SingleClass)
            ));
        }
    }

    #[test]
    fn non_finite_feature_names_row_and_column() {
        let m = matrix(
            &[vec![1.0, 0.0], vec![2.0, f64::NAN]],
            &[Label::First, Label::Second],
        );
        match fit(DetectorKind::Logistic, &m, &TrainConfig::default()) {
            Err(Error::NonFinite { row, column }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "x1");
            }
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn arity_mismatch() {
        let m = matrix(
            &[vec![-1.0, 0.0], vec![1.0, 0.5], vec![-2.0, 1.0], vec![2.0, 0.0]],
            &[Label::First, Label::Second, Label::First, Label::Second],
        );
        let model = fit(DetectorKind::NaiveBayes, &m, &TrainConfig::default()).unwrap();
        let mut row = m.rows[0].clone();
        row.values.push(3.0);
        assert!(matches!(predict_proba(&model, &row), Err(Error::Arity { .. })));
    }

    #[test]
    fn model_json_round_trip() {
        let m = matrix(
            &[vec![-1.0, 0.3], vec![1.0, 0.5], vec![-2.0, 1.0], vec![2.0, 0.1]],
            &[Label::First, Label::Second, Label::First, Label::Second],
        );
        for kind in [DetectorKind::NaiveBayes, DetectorKind::Logistic, DetectorKind::Mlp] {
            let model = fit(kind, &m, &TrainConfig::default()).unwrap();
            let back = DetectorModel::from_json(&model.to_json()).unwrap();
            assert_eq!(back, model);
            let v: serde_json::Value = serde_json::from_str(&model.to_json()).unwrap();
            for key in ["kind", "parameters", "norm_stats", "config", "format_version"] {
                assert!(v.get(key).is_some(), "{kind}: missing {key}");
            }
        }
    }

    #[test]
    fn kind_names_parse() {
        for k in DetectorKind::ALL {
            assert_eq!(k.to_string().parse::<DetectorKind>().unwrap(), k);
        }
        assert!("svm".parse::<DetectorKind>().is_err());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}
