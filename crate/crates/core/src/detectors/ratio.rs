//! Latency-ratio baseline: mean latency of the faster critical pairing over
//! the mean latency of the practice blocks that introduce it.

use super::{sigmoid, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::metrics::{metrics, Confusion};
use crate::features::{FeatureMatrix, Label};
use crate::session::Session;
use crate::stats::mean;

/// Critical blocks pairing ComputerScience with Male, and their practice blocks.
pub const PAIR_A: ([usize; 2], &[usize]) = ([3, 4], &[1, 2]);
/// Critical blocks pairing ComputerScience with Female, and their practice block.
pub const PAIR_B: ([usize; 2], &[usize]) = ([6, 7], &[5]);

/// Threshold grid searched when fitting: 0.50, 0.51, ..., 2.00.
pub fn threshold_grid() -> impl Iterator<Item = f64> {
    (50..=200).map(|i| i as f64 / 100.0)
}

/// Steepness of the probability mapping around the threshold.
const RATIO_SLOPE: f64 = 50.0;

fn correct_latencies(s: &Session, blocks: &[usize]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for &b in blocks {
        let block = s.block(b).ok_or_else(|| Error::Unscorable {
            session_id: s.session_id.clone(),
            reason: format!("block {b} is missing"),
        })?;
        out.extend(block.trials.iter().filter(|t| t.correct).map(|t| t.latency_ms));
    }
    if out.is_empty() {
        return Err(Error::Unscorable {
            session_id: s.session_id.clone(),
            reason: format!("no correct trials in blocks {blocks:?}"),
        });
    }
    Ok(out)
}

pub fn ratio_score(s: &Session) -> Result<f64> {
    let a = mean(&correct_latencies(s, &PAIR_A.0)?);
    let b = mean(&correct_latencies(s, &PAIR_B.0)?);
    let (fastest, practice) = if a <= b { (a, PAIR_A.1) } else { (b, PAIR_B.1) };
    Ok(fastest / mean(&correct_latencies(s, practice)?))
}

pub fn ratio_proba(ratio: f64, threshold: f64) -> f64 {
    sigmoid(RATIO_SLOPE * (ratio - threshold))
}

/// The configured threshold, or the grid value maximizing training weighted
/// F1 (lowest on ties).
pub fn fit_threshold(m: &FeatureMatrix, cfg: &TrainConfig) -> Result<f64> {
    if let Some(t) = cfg.ratio_threshold {
        return Ok(t);
    }
    let rows: Vec<(f64, Label)> = m
        .rows
        .iter()
        .map(|r| {
            r.ratio.map(|x| (x, r.label)).ok_or_else(|| {
                Error::InsufficientData(format!("no latency ratio for {}", r.session_id))
            })
        })
        .collect::<Result<_>>()?;
    let mut best = (f64::NEG_INFINITY, 1.0);
    for t in threshold_grid() {
        let mut c = Confusion::default();
        for &(x, label) in &rows {
            let predicted = if x >= t { Label::Second } else { Label::First };
            c.add(label, predicted);
        }
        let f1 = metrics(&c)?.weighted_f1;
        if f1 > best.0 {
            best = (f1, t);
        }
    }
    Ok(best.1)
}
