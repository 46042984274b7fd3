//! Attempt-level summary of a cohort: mean (SD) of response time, error rate
//! and score per attempt, with paired t-tests between attempts.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::is_reversal;
use crate::scoring::{d_score, ScoreResult};
use crate::session::Cohort;
use crate::stats::{mean, paired_t_test, sample_sd, PairedTTest};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    fn of(xs: &[f64]) -> MeanSd {
        MeanSd {
            mean: mean(xs),
            sd: sample_sd(xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptSummary {
    pub mean_rt_s: MeanSd,
    pub error_rate: MeanSd,
    pub d_score: MeanSd,
    /// Fraction of attempts with a score above zero.
    pub positive_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortStats {
    pub pairs: usize,
    pub skipped: usize,
    pub first: AttemptSummary,
    pub second: AttemptSummary,
    pub t_mean_rt: PairedTTest,
    pub t_error_rate: PairedTTest,
    pub t_d_score: PairedTTest,
    /// Second attempts that moved against the first score by at least one
    /// first-attempt SD.
    pub reversals: usize,
}

fn summarize(results: &[&ScoreResult]) -> AttemptSummary {
    let rt: Vec<f64> = results.iter().map(|r| r.mean_rt_s).collect();
    let er: Vec<f64> = results.iter().map(|r| r.error_rate).collect();
    let d: Vec<f64> = results.iter().map(|r| r.d_score).collect();
    AttemptSummary {
        mean_rt_s: MeanSd::of(&rt),
        error_rate: MeanSd::of(&er),
        d_score: MeanSd::of(&d),
        positive_fraction: d.iter().filter(|&&x| x > 0.0).count() as f64 / d.len() as f64,
    }
}

pub fn cohort_stats(c: &Cohort) -> Result<CohortStats> {
    cohort_stats_with(c, Execution::default())
}

pub fn cohort_stats_with(c: &Cohort, exec: Execution) -> Result<CohortStats> {
    let scored = exec.map_slice(&c.pairs, |p| match (d_score(&p.first), d_score(&p.second)) {
        (Ok(a), Ok(b)) => Some((a, b)),
        (Err(e), _) | (_, Err(e)) => {
            log::warn!("skipping participant {}: {e}", p.first.participant_id);
            None
        }
    });
    let skipped = scored.iter().filter(|s| s.is_none()).count();
    let pairs: Vec<(ScoreResult, ScoreResult)> = scored.into_iter().flatten().collect();
    if pairs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "cohort statistics need at least 2 scorable pairs, got {}",
            pairs.len()
        )));
    }
    let firsts: Vec<&ScoreResult> = pairs.iter().map(|p| &p.0).collect();
    let seconds: Vec<&ScoreResult> = pairs.iter().map(|p| &p.1).collect();
    let col = |rs: &[&ScoreResult], f: fn(&ScoreResult) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let d1 = col(&firsts, |r| r.d_score);
    let d2 = col(&seconds, |r| r.d_score);
    let sigma = sample_sd(&d1);
    let reversals = d1
        .iter()
        .zip(&d2)
        .filter(|(&a, &b)| is_reversal(a, b, sigma))
        .count();
    Ok(CohortStats {
        pairs: pairs.len(),
        skipped,
        first: summarize(&firsts),
        second: summarize(&seconds),
        t_mean_rt: paired_t_test(&col(&firsts, |r| r.mean_rt_s), &col(&seconds, |r| r.mean_rt_s)),
        t_error_rate: paired_t_test(
            &col(&firsts, |r| r.error_rate),
            &col(&seconds, |r| r.error_rate),
        ),
        t_d_score: paired_t_test(&d1, &d2),
        reversals,
    })
}

fn format_p(p: f64) -> String {
    if p < 1e-4 {
        "<0.0001".to_string()
    } else {
        format!("{p:.4}")
    }
}

impl CohortStats {
    /// Table of mean (SD) per attempt with a p-value row.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let row = |name: &str, a: &AttemptSummary| {
            format!(
                "{:<8} | {:>15} | {:>15} | {:>15}\n",
                name,
                format!("{:.3} ({:.3})", a.mean_rt_s.mean, a.mean_rt_s.sd),
                format!("{:.3} ({:.3})", a.error_rate.mean, a.error_rate.sd),
                format!("{:.3} ({:.3})", a.d_score.mean, a.d_score.sd),
            )
        };
        let _ = writeln!(
            out,
            "{:<8} | {:>15} | {:>15} | {:>15}",
            "Attempt", "Response Time", "Error Rate", "Score"
        );
        out.push_str(&row("First", &self.first));
        out.push_str(&row("Second", &self.second));
        let _ = writeln!(
            out,
            "{:<8} | {:>15} | {:>15} | {:>15}",
            "p-value",
            format_p(self.t_mean_rt.p_value),
            format_p(self.t_error_rate.p_value),
            format_p(self.t_d_score.p_value)
        );
        let _ = writeln!(
            out,
            "pairs: {} (skipped {}); first attempts above zero: {:.1}%; second attempts above zero: {:.1}%; 1-SD reversals: {}/{}",
            self.pairs,
            self.skipped,
            100.0 * self.first.positive_fraction,
            100.0 * self.second.positive_fraction,
            self.reversals,
            self.pairs
        );
        out
    }
}
