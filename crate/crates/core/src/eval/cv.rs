//! Leave-one-out and stratified k-fold cross-validation.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{metrics, Confusion};
use crate::detectors::{fit, label_for, predict_proba, DetectorKind, DetectorModel, TrainConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::{select_features, FeatureMatrix, Label, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Loocv,
    Kfold(usize),
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Loocv => f.write_str("loocv"),
            Scheme::Kfold(k) => write!(f, "kfold:{k}"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;
    /// `loocv`, `kfold` (10 folds) or `kfold:K`.
    fn from_str(s: &str) -> Result<Scheme> {
        match s {
            "loocv" => Ok(Scheme::Loocv),
            "kfold" => Ok(Scheme::Kfold(10)),
            _ => s
                .strip_prefix("kfold:")
                .and_then(|k| k.parse().ok())
                .filter(|&k: &usize| k >= 2)
                .map(Scheme::Kfold)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown scheme {s:?}"))),
        }
    }
}

/// Where the correlation-selection mask comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Use the matrix's mask as given (computed once on the full dataset).
    Global,
    /// Recompute the mask on each fold's training rows.
    PerFold { threshold: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct CvOptions {
    pub scheme: Scheme,
    pub selection: SelectionMode,
    pub exec: Execution,
}

impl CvOptions {
    pub fn new(scheme: Scheme) -> CvOptions {
        CvOptions {
            scheme,
            selection: SelectionMode::Global,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub index: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Fold assignment. k-fold deals each class's shuffled rows round-robin so
/// every fold gets a proportional share of both labels.
pub fn make_folds(labels: &[Label], scheme: Scheme, seed: u64) -> Result<Vec<Fold>> {
    let n = labels.len();
    let assignment: Vec<usize> = match scheme {
        Scheme::Loocv => {
            if n < 2 {
                return Err(Error::InsufficientData(format!(
                    "leave-one-out needs at least 2 rows, got {n}"
                )));
            }
            (0..n).collect()
        }
        Scheme::Kfold(k) => {
            if k < 2 || k > n {
                return Err(Error::InsufficientData(format!(
                    "{k}-fold cross-validation needs at least {k} rows, got {n}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut fold_of = vec![0; n];
            let mut next = 0;
            for class in [Label::First, Label::Second] {
                let mut idx: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
                idx.shuffle(&mut rng);
                for i in idx {
                    fold_of[i] = next % k;
                    next += 1;
                }
            }
            fold_of
        }
    };
    let folds = match scheme {
        Scheme::Loocv => n,
        Scheme::Kfold(k) => k,
    };
    Ok((0..folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| assignment[i] == f);
            Fold {
                index: f,
                train,
                test,
            }
        })
        .collect())
}

/// Fits one fold's model from its training rows only.
pub fn fit_fold(
    kind: DetectorKind,
    m: &FeatureMatrix,
    cfg: &TrainConfig,
    fold: &Fold,
    selection: SelectionMode,
) -> Result<DetectorModel> {
    let wrap = |e| Error::Fold {
        fold: fold.index,
        source: Box::new(e),
    };
    let mut train = m.subset(&fold.train);
    if let SelectionMode::PerFold { threshold } = selection {
        train.selected = vec![true; train.feature_names.len()];
        train = select_features(&train, threshold).map_err(wrap)?;
    }
    fit(kind, &train, cfg).map_err(wrap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub session_id: String,
    pub label: Label,
    pub proba: f64,
    pub predicted: Label,
    pub fold: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub detector: DetectorKind,
    pub variant: Variant,
    pub scheme: Scheme,
    pub seed: u64,
    pub n: usize,
    pub folds: usize,
    pub selected_features: Vec<String>,
    pub per_fold_predictions: Vec<Prediction>,
    pub confusion: Confusion,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub weighted_f1: f64,
}

pub fn cross_validate(
    kind: DetectorKind,
    m: &FeatureMatrix,
    cfg: &TrainConfig,
    scheme: Scheme,
) -> Result<EvalReport> {
    cross_validate_with(kind, m, cfg, &CvOptions::new(scheme))
}

pub fn cross_validate_with(
    kind: DetectorKind,
    m: &FeatureMatrix,
    cfg: &TrainConfig,
    opts: &CvOptions,
) -> Result<EvalReport> {
    let folds = make_folds(&m.labels(), opts.scheme, cfg.seed)?;
    let per_fold = opts.exec.map_slice(&folds, |fold| -> Result<Vec<Prediction>> {
        let model = fit_fold(kind, m, cfg, fold, opts.selection)?;
        fold.test
            .iter()
            .map(|&i| {
                let row = &m.rows[i];
                let proba = predict_proba(&model, row).map_err(|e| Error::Fold {
                    fold: fold.index,
                    source: Box::new(e),
                })?;
                Ok(Prediction {
                    session_id: row.session_id.clone(),
                    label: row.label,
                    proba,
                    predicted: label_for(proba, cfg.threshold),
                    fold: fold.index,
                })
            })
            .collect()
    });
    let mut predictions = Vec::with_capacity(m.len());
    for p in per_fold {
        predictions.extend(p?);
    }
    predictions.sort_by(|a, b| a.session_id.cmp(&b.session_id));

    let mut confusion = Confusion::default();
    for p in &predictions {
        confusion.add(p.label, p.predicted);
    }
    let scores = metrics(&confusion)?;
    Ok(EvalReport {
        detector: kind,
        variant: m.variant,
        scheme: opts.scheme,
        seed: cfg.seed,
        n: m.len(),
        folds: folds.len(),
        selected_features: if kind == DetectorKind::Ratio {
            Vec::new()
        } else {
            m.selected_names()
        },
        per_fold_predictions: predictions,
        confusion,
        accuracy: scores.accuracy,
        precision: scores.precision,
        recall: scores.recall,
        weighted_f1: scores.weighted_f1,
    })
}
