//! D-score (improved algorithm, D600 error penalty) and association labels.
//!
//! Positive scores mean faster responding when ComputerScience and Male share
//! a key, i.e. blocks 3/4 are faster than blocks 6/7.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::session::{Block, Session, Trial};
use crate::stats::{mean, sample_sd};

/// Trials slower than this are discarded before scoring.
pub const MAX_LATENCY_MS: f64 = 10_000.0;
/// Latencies under this count toward the fast-responder flag.
pub const FAST_LATENCY_MS: f64 = 300.0;
/// Fraction of fast critical trials above which a session is flagged.
pub const FAST_FRACTION: f64 = 0.10;
/// Added to the block mean of correct latencies to replace an error latency.
pub const ERROR_PENALTY_MS: f64 = 600.0;

/// Critical block pairs compared by the two subscores: (CS+Male block, CS+Female block).
pub const PRACTICE_PAIR: (usize, usize) = (3, 6);
pub const TEST_PAIR: (usize, usize) = (4, 7);
pub const CRITICAL_BLOCKS: [usize; 4] = [3, 4, 6, 7];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreFlag {
    FastResponder,
    LongTrialsDropped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subscores {
    /// Blocks 3 vs 6.
    pub d_practice_pair: f64,
    /// Blocks 4 vs 7.
    pub d_test_pair: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResult {
    pub session_id: String,
    pub d_score: f64,
    pub subscores: Subscores,
    pub flags: BTreeSet<ScoreFlag>,
    /// Mean critical-block latency in seconds, error trials included unreplaced.
    pub mean_rt_s: f64,
    /// Fraction of critical-block trials answered incorrectly.
    pub error_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Association {
    CsMale,
    CsFemale,
    Neutral,
}

impl fmt::Display for Association {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Association::CsMale => "CS↔Male",
            Association::CsFemale => "CS↔Female",
            Association::Neutral => "neutral",
        })
    }
}

/// Drops over-long trials and flags fast responders; no trial is dropped for speed.
pub fn clean_trials(s: &Session) -> Result<(Session, BTreeSet<ScoreFlag>)> {
    let mut flags = BTreeSet::new();
    let mut cleaned = s.clone();
    for block in &mut cleaned.blocks {
        let before = block.trials.len();
        block.trials.retain(|t| t.latency_ms <= MAX_LATENCY_MS);
        if block.trials.len() != before {
            flags.insert(ScoreFlag::LongTrialsDropped);
        }
    }

    let mut critical = 0usize;
    let mut fast = 0usize;
    for &index in &CRITICAL_BLOCKS {
        let block = critical_block(&cleaned, index)?;
        let correct = block.trials.iter().filter(|t| t.correct).count();
        if correct < 2 {
            return Err(Error::Unscorable {
                session_id: s.session_id.clone(),
                reason: format!("block {index} has {correct} correct trials after cleaning"),
            });
        }
        critical += block.trials.len();
        fast += block
            .trials
            .iter()
            .filter(|t| t.latency_ms < FAST_LATENCY_MS)
            .count();
    }
    if critical > 0 && fast as f64 > FAST_FRACTION * critical as f64 {
        flags.insert(ScoreFlag::FastResponder);
    }
    Ok((cleaned, flags))
}

fn critical_block(s: &Session, index: usize) -> Result<&Block> {
    s.block(index).ok_or_else(|| Error::Unscorable {
        session_id: s.session_id.clone(),
        reason: format!("block {index} is missing"),
    })
}

/// Latencies of one block with error trials replaced by mean(correct) + 600 ms.
pub(crate) fn penalized_latencies(trials: &[Trial]) -> Vec<f64> {
    let correct: Vec<f64> = trials
        .iter()
        .filter(|t| t.correct)
        .map(|t| t.latency_ms)
        .collect();
    let replacement = mean(&correct) + ERROR_PENALTY_MS;
    trials
        .iter()
        .map(|t| if t.correct { t.latency_ms } else { replacement })
        .collect()
}

fn pair_subscore(s: &Session, (cs_male, cs_female): (usize, usize)) -> Result<f64> {
    let fast = penalized_latencies(&critical_block(s, cs_male)?.trials);
    let slow = penalized_latencies(&critical_block(s, cs_female)?.trials);
    let pooled: Vec<f64> = fast.iter().chain(slow.iter()).copied().collect();
    let sd = sample_sd(&pooled);
    if !(sd > 0.0) {
        return Err(Error::Unscorable {
            session_id: s.session_id.clone(),
            reason: format!("zero pooled SD in blocks {cs_male}/{cs_female}"),
        });
    }
    Ok((mean(&slow) - mean(&fast)) / sd)
}

pub fn d_score(s: &Session) -> Result<ScoreResult> {
    let (cleaned, flags) = clean_trials(s)?;
    let d_practice_pair = pair_subscore(&cleaned, PRACTICE_PAIR)?;
    let d_test_pair = pair_subscore(&cleaned, TEST_PAIR)?;

    let mut total = 0.0;
    let mut n = 0usize;
    let mut errors = 0usize;
    for &index in &CRITICAL_BLOCKS {
        for t in &critical_block(&cleaned, index)?.trials {
            total += t.latency_ms;
            n += 1;
            errors += usize::from(!t.correct);
        }
    }

    Ok(ScoreResult {
        session_id: s.session_id.clone(),
        d_score: (d_practice_pair + d_test_pair) / 2.0,
        subscores: Subscores {
            d_practice_pair,
            d_test_pair,
        },
        flags,
        mean_rt_s: total / n as f64 / 1000.0,
        error_rate: errors as f64 / n as f64,
    })
}

pub fn association_label(r: &ScoreResult) -> Association {
    association_of(r.d_score)
}

pub fn association_of(d: f64) -> Association {
    if d > 0.0 {
        Association::CsMale
    } else if d < 0.0 {
        Association::CsFemale
    } else {
        Association::Neutral
    }
}
