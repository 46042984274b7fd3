//! Per-block latency features, correlation-based feature selection, and the
//! unpruned/pruned dataset variants.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detectors::ratio::ratio_score;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::scoring::{d_score, FAST_LATENCY_MS};
use crate::session::{Cohort, Session, Trial, BLOCK_COUNT};
use crate::stats::{pearson, quantile_sorted, sample_sd, skewness};

pub const STATS_PER_BLOCK: usize = 8;
pub const FEATURE_COUNT: usize = STATS_PER_BLOCK * BLOCK_COUNT;
pub const DEFAULT_CORRELATION_THRESHOLD: f64 = 0.75;

const STAT_NAMES: [&str; STATS_PER_BLOCK] = [
    "error_pct",
    "fast_pct",
    "min",
    "q1",
    "median",
    "q3",
    "max",
    "skewness",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    First,
    Second,
}

impl Label {
    pub fn of_attempt(attempt: u8) -> Label {
        if attempt == 1 {
            Label::First
        } else {
            Label::Second
        }
    }

    /// 1.0 for the positive class (second attempts).
    pub fn target(self) -> f64 {
        match self {
            Label::First => 0.0,
            Label::Second => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::First => "first",
            Label::Second => "second",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Label> {
        match s {
            "first" => Ok(Label::First),
            "second" => Ok(Label::Second),
            other => Err(Error::Parse(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Unpruned,
    Pruned,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Unpruned => "unpruned",
            Variant::Pruned => "pruned",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Variant> {
        match s {
            "unpruned" => Ok(Variant::Unpruned),
            "pruned" => Ok(Variant::Pruned),
            other => Err(Error::Parse(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub session_id: String,
    pub label: Label,
    /// Block 1..7 × [error_pct, fast_pct, min, q1, median, q3, max, skewness].
    pub values: Vec<f64>,
    /// Fastest-critical-pair to practice latency ratio, carried alongside the
    /// features for the ratio baseline. Never part of `values`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureVector>,
    pub feature_names: Vec<String>,
    pub selected: Vec<bool>,
    pub variant: Variant,
}

pub fn feature_names() -> Vec<String> {
    (1..=BLOCK_COUNT)
        .flat_map(|b| STAT_NAMES.iter().map(move |s| format!("b{b}_{s}")))
        .collect()
}

/// The eight statistics of one block's trials.
pub fn block_features(trials: &[Trial]) -> Result<[f64; STATS_PER_BLOCK]> {
    if trials.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} trials, at least 3 needed",
            trials.len()
        )));
    }
    let n = trials.len() as f64;
    let errors = trials.iter().filter(|t| !t.correct).count() as f64;
    let fast = trials
        .iter()
        .filter(|t| t.latency_ms < FAST_LATENCY_MS)
        .count() as f64;
    let mut lat: Vec<f64> = trials.iter().map(|t| t.latency_ms).collect();
    let skew = skewness(&lat);
    lat.sort_by(f64::total_cmp);
    Ok([
        errors / n,
        fast / n,
        lat[0],
        quantile_sorted(&lat, 0.25),
        quantile_sorted(&lat, 0.5),
        quantile_sorted(&lat, 0.75),
        lat[lat.len() - 1],
        skew,
    ])
}

pub fn featurize(s: &Session) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(FEATURE_COUNT);
    for index in 1..=BLOCK_COUNT {
        let block = s.block(index).ok_or_else(|| Error::Block {
            block: index,
            source: Box::new(Error::InsufficientData("block missing".into())),
        })?;
        let stats = block_features(&block.trials).map_err(|e| Error::Block {
            block: index,
            source: Box::new(e),
        })?;
        values.extend_from_slice(&stats);
    }
    Ok(FeatureVector {
        session_id: s.session_id.clone(),
        label: Label::of_attempt(s.attempt),
        values,
        ratio: ratio_score(s).ok(),
    })
}

impl FeatureMatrix {
    pub fn new(rows: Vec<FeatureVector>, variant: Variant) -> FeatureMatrix {
        FeatureMatrix {
            rows,
            feature_names: feature_names(),
            selected: vec![true; FEATURE_COUNT],
            variant,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.values[j]).collect()
    }

    pub fn selected_indices(&self) -> Vec<usize> {
        self.selected
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| s.then_some(i))
            .collect()
    }

    pub fn selected_names(&self) -> Vec<String> {
        self.selected_indices()
            .into_iter()
            .map(|i| self.feature_names[i].clone())
            .collect()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// Rows at `indices`, in that order, with the same names and mask.
    pub fn subset(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            selected: self.selected.clone(),
            variant: self.variant,
        }
    }

    /// Applies a sidecar mask given as a list of selected feature names.
    pub fn with_selected_names(mut self, names: &[String]) -> Result<FeatureMatrix> {
        for n in names {
            if !self.feature_names.contains(n) {
                return Err(Error::InvalidArgument(format!("unknown feature {n:?}")));
            }
        }
        self.selected = self.feature_names.iter().map(|f| names.contains(f)).collect();
        if !self.selected.iter().any(|&s| s) {
            return Err(Error::InvalidArgument("mask selects no features".into()));
        }
        Ok(self)
    }
}

/// Greedy correlation filter in feature-index order: for each selected i and
/// each later selected j, drop j when |r(i, j)| > threshold. Constant columns
/// correlate 0 with everything except an identical constant column.
pub fn select_features(m: &FeatureMatrix, threshold: f64) -> Result<FeatureMatrix> {
    if m.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "feature selection needs at least 2 rows, got {}",
            m.len()
        )));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be in (0, 1], got {threshold}"
        )));
    }
    let p = m.feature_names.len();
    let columns: Vec<Vec<f64>> = (0..p).map(|j| m.column(j)).collect();
    let constant: Vec<bool> = columns
        .iter()
        .map(|c| c.iter().all(|&v| v == c[0]))
        .collect();
    let mut selected = m.selected.clone();
    for i in 0..p {
        if !selected[i] {
            continue;
        }
        for j in (i + 1)..p {
            if !selected[j] {
                continue;
            }
            let r = if constant[i] && constant[j] {
                if columns[i][0] == columns[j][0] {
                    1.0
                } else {
                    0.0
                }
            } else {
                pearson(&columns[i], &columns[j])
            };
            if r.abs() > threshold {
                selected[j] = false;
            }
        }
    }
    Ok(FeatureMatrix {
        selected,
        ..m.clone()
    })
}

/// Pruning criterion: the second score moved against the sign of the first
/// (either way when the first is exactly 0) by at least `sigma_first`.
pub fn is_reversal(d_first: f64, d_second: f64, sigma_first: f64) -> bool {
    let delta = d_second - d_first;
    let opposite = d_first == 0.0 || delta.signum() == -d_first.signum();
    opposite && delta != 0.0 && delta.abs() >= sigma_first
}

#[derive(Debug, Clone)]
pub struct Datasets {
    pub unpruned: FeatureMatrix,
    pub pruned: FeatureMatrix,
    /// Sample SD of first-attempt scores across the cohort's pairs.
    pub sigma_first: f64,
    pub reversals: usize,
}

pub fn assemble_datasets(c: &Cohort, extra_firsts: &[Session]) -> Result<Datasets> {
    assemble_datasets_with(c, extra_firsts, Execution::default())
}

pub fn assemble_datasets_with(
    c: &Cohort,
    extra_firsts: &[Session],
    exec: Execution,
) -> Result<Datasets> {
    if c.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let pair_results = exec.map_slice(&c.pairs, |p| -> Result<_> {
        let d1 = d_score(&p.first)?.d_score;
        let d2 = d_score(&p.second)?.d_score;
        Ok((d1, d2, featurize(&p.first)?, featurize(&p.second)?))
    });
    let pair_results = pair_results.into_iter().collect::<Result<Vec<_>>>()?;
    let extras = exec
        .map_slice(extra_firsts, featurize)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let firsts: Vec<f64> = pair_results.iter().map(|r| r.0).collect();
    let sigma_first = if firsts.len() >= 2 { sample_sd(&firsts) } else { 0.0 };

    let mut unpruned = Vec::with_capacity(2 * c.len() + extras.len());
    let mut pruned = Vec::with_capacity(2 * c.len() + extras.len());
    let mut reversals = 0;
    for (d1, d2, f1, f2) in pair_results {
        let keep = is_reversal(d1, d2, sigma_first);
        reversals += usize::from(keep);
        unpruned.push(f1.clone());
        pruned.push(f1);
        unpruned.push(f2.clone());
        if keep {
            pruned.push(f2);
        }
    }
    unpruned.extend(extras.iter().cloned());
    pruned.extend(extras);
    Ok(Datasets {
        unpruned: FeatureMatrix::new(unpruned, Variant::Unpruned),
        pruned: FeatureMatrix::new(pruned, Variant::Pruned),
        sigma_first,
        reversals,
    })
}

/// Writes the matrix as CSV: feature columns, then `label`, then `session_id`.
pub fn write_csv<W: Write>(w: W, m: &FeatureMatrix) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = m.feature_names.clone();
    header.push("label".into());
    header.push("session_id".into());
    out.write_record(&header).map_err(csv_err)?;
    for row in &m.rows {
        let mut rec: Vec<String> = row.values.iter().map(|v| v.to_string()).collect();
        rec.push(row.label.to_string());
        rec.push(row.session_id.clone());
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R, variant: Variant) -> Result<FeatureMatrix> {
    let mut input = csv::Reader::from_reader(r);
    let header: Vec<String> = input
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 3 || header[header.len() - 2] != "label" || header[header.len() - 1] != "session_id" {
        return Err(Error::Parse(
            "feature CSV must end with label and session_id columns".into(),
        ));
    }
    let feature_names = header[..header.len() - 2].to_vec();
    let mut rows = Vec::new();
    for (n, rec) in input.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let p = feature_names.len();
        let mut values = Vec::with_capacity(p);
        for (j, field) in rec.iter().take(p).enumerate() {
            values.push(field.parse::<f64>().map_err(|_| {
                Error::Parse(format!(
                    "row {}: column {} is not a number: {field:?}",
                    n + 1,
                    feature_names[j]
                ))
            })?);
        }
        rows.push(FeatureVector {
            session_id: rec.get(p + 1).unwrap_or_default().to_string(),
            label: rec.get(p).unwrap_or_default().parse()?,
            values,
            ratio: None,
        });
    }
    let selected = vec![true; feature_names.len()];
    Ok(FeatureMatrix {
        rows,
        feature_names,
        selected,
        variant,
    })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}
