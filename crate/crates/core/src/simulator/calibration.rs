//! Cohort calibration constants.
//!
//! Every tunable of the respondent and strategy models lives here. The
//! defaults are tuned so that a large default cohort lands on the target
//! cohort means: first-attempt critical-block RT 0.802 s, error rate 0.069,
//! D-score 0.395 (87% above zero), and a second-attempt mean score near 0.01.
//! The second-attempt mean settles around −0.08; raising it means weaker
//! strategies and fewer score reversals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of the population that respondent profiles are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Calibration {
    /// Mean and SD across people of the per-person log-latency location (log ms).
    pub log_mu_mean: f64,
    pub log_mu_sd: f64,
    /// Mean and SD across people of the within-person log-latency spread.
    pub log_sigma_mean: f64,
    pub log_sigma_sd: f64,
    /// Slowdown of the incongruent critical pairing (ms); positive favours CS↔Male.
    pub effect_mean_ms: f64,
    pub effect_sd_ms: f64,
    /// Per-person base error probability: Beta with this mean and SD, clamped to [0, 0.3].
    pub error_rate_mean: f64,
    pub error_rate_sd: f64,
    /// Extra latency in the single-category practice blocks 1, 2, 5.
    pub practice_slowdown_mean_ms: f64,
    pub practice_slowdown_sd_ms: f64,
    /// Additional slowdown of block 5 (first block after the concepts swap keys).
    pub switch_cost_mean_ms: f64,
    pub switch_cost_sd_ms: f64,
    /// Second-attempt latency added (fatigue) and removed (familiarity).
    pub fatigue_mean_ms: f64,
    pub fatigue_sd_ms: f64,
    pub familiarity_mean_ms: f64,
    pub familiarity_sd_ms: f64,
    /// Extra second-attempt speedup of the practice blocks only.
    pub practice_familiarity_mean_ms: f64,
    pub practice_familiarity_sd_ms: f64,
    /// Additive change of the error probability on the second attempt.
    pub second_error_shift: f64,
    /// Beta(a, b) for the fraction of targeted trials a respondent actually
    /// applies an instructed strategy to.
    pub adherence_alpha: f64,
    pub adherence_beta: f64,
    /// Per-strategy intensity, indexed by strategy id − 1.
    pub strategies: [StrategyIntensity; 5],
}

/// Effect sizes of one deception strategy on a targeted trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyIntensity {
    /// Added latency per applied trial ~ N(mean, sd), floored at 0.
    pub delay_mean_ms: f64,
    pub delay_sd_ms: f64,
    /// Expected number of intentional errors across the targeted blocks.
    pub intended_errors: f64,
    /// Multiplier on the odds of an error on applied trials.
    pub error_odds_multiplier: f64,
    /// Extra latency on intentionally wrong trials.
    pub hesitation_ms: f64,
    /// Fraction of targeted trials the strategy is applied to.
    pub adherence: f64,
}

impl StrategyIntensity {
    const fn delay(mean: f64, sd: f64) -> StrategyIntensity {
        StrategyIntensity {
            delay_mean_ms: mean,
            delay_sd_ms: sd,
            intended_errors: 0.0,
            error_odds_multiplier: 1.0,
            hesitation_ms: 0.0,
            adherence: 1.0,
        }
    }

    /// Full-adherence intensity of strategy `id` (1..=5).
    pub fn standard(id: u8) -> StrategyIntensity {
        match id {
            1 => StrategyIntensity {
                intended_errors: 10.0,
                hesitation_ms: 800.0,
                ..StrategyIntensity::delay(0.0, 0.0)
            },
            2 => StrategyIntensity::delay(1000.0, 150.0),
            3 => StrategyIntensity::delay(900.0, 300.0),
            4 => StrategyIntensity {
                error_odds_multiplier: 3.0,
                ..StrategyIntensity::delay(400.0, 150.0)
            },
            5 => StrategyIntensity::delay(800.0, 200.0),
            _ => panic!("strategy id must be in 1..=5, got {id}"),
        }
    }
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration {
            log_mu_mean: 6.55,
            log_mu_sd: 0.13,
            log_sigma_mean: 0.30,
            log_sigma_sd: 0.05,
            effect_mean_ms: 105.0,
            effect_sd_ms: 90.0,
            error_rate_mean: 0.069,
            error_rate_sd: 0.045,
            practice_slowdown_mean_ms: 60.0,
            practice_slowdown_sd_ms: 60.0,
            switch_cost_mean_ms: 130.0,
            switch_cost_sd_ms: 60.0,
            fatigue_mean_ms: 25.0,
            fatigue_sd_ms: 30.0,
            familiarity_mean_ms: 45.0,
            familiarity_sd_ms: 20.0,
            practice_familiarity_mean_ms: 80.0,
            practice_familiarity_sd_ms: 40.0,
            second_error_shift: 0.0,
            adherence_alpha: 10.0,
            adherence_beta: 10.0,
            strategies: [1, 2, 3, 4, 5].map(StrategyIntensity::standard),
        }
    }
}

impl Calibration {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("log_sigma_mean", self.log_sigma_mean),
            ("adherence_alpha", self.adherence_alpha),
            ("adherence_beta", self.adherence_beta),
            ("error_rate_sd", self.error_rate_sd),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        let m = self.error_rate_mean;
        if !(m > 0.0 && m < 0.3) || self.error_rate_sd * self.error_rate_sd >= m * (1.0 - m) {
            return Err(Error::InvalidArgument(
                "error_rate_mean must be in (0, 0.3) with variance below mean·(1 − mean)".into(),
            ));
        }
        Ok(())
    }

    /// Beta shape parameters matching the error-rate mean and SD.
    pub fn error_rate_beta(&self) -> (f64, f64) {
        let m = self.error_rate_mean;
        let v = self.error_rate_sd * self.error_rate_sd;
        let k = m * (1.0 - m) / v - 1.0;
        (m * k, (1.0 - m) * k)
    }
}
