//! Synthetic respondents: honest first attempts and second attempts under the
//! five deception strategies, applied correctly or misapplied.
//!
//! Latencies are log-normal per person plus additive block effects. Every
//! random draw comes from a ChaCha stream derived from the master seed and
//! the pair index, so cohorts are reproducible and can be generated in
//! parallel with output identical to a serial run.

pub mod calibration;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use calibration::{Calibration, StrategyIntensity};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::scoring::{association_of, d_score, Association};
use crate::session::{standard_block_layout, Block, BlockSpec, Cohort, Session, SessionPair, Trial};

/// Latencies are floored here after all additive adjustments.
pub const MIN_LATENCY_MS: f64 = 150.0;
pub const MAX_ERROR_RATE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RespondentProfile {
    pub participant_id: String,
    pub base_log_latency_mu: f64,
    pub base_log_latency_sigma: f64,
    /// Added to the incongruent critical blocks; the sign gives the direction
    /// (positive: blocks 6/7 are slowed, i.e. a CS↔Male association).
    pub congruency_effect_ms: f64,
    pub base_error_rate: f64,
    /// Added to practice blocks 1, 2 and 5.
    pub practice_slowdown_ms: f64,
    /// Extra slowdown in block 5, where the concept keys swap sides.
    pub switch_cost_ms: f64,
    /// Added to every second-attempt trial.
    pub fatigue_ms: f64,
    /// Subtracted from every second-attempt trial.
    pub familiarity_ms: f64,
    /// Further subtracted from second-attempt practice blocks, whose
    /// single-category sorting is a repeat of the first attempt.
    pub practice_familiarity_ms: f64,
    /// Added to the error probability on the second attempt.
    pub second_error_shift: f64,
    pub started_at: DateTime<Utc>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplianceMode {
    /// Strategy applied in the congruent critical pairing, as instructed.
    Correct,
    /// Strategy shown but not applied.
    None,
    /// Applied during the practice blocks instead.
    PracticeMisapplied,
    /// Applied during the incongruent critical pairing.
    WrongCritical,
}

impl ComplianceMode {
    pub const ALL: [ComplianceMode; 4] = [
        ComplianceMode::Correct,
        ComplianceMode::None,
        ComplianceMode::PracticeMisapplied,
        ComplianceMode::WrongCritical,
    ];
}

impl fmt::Display for ComplianceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComplianceMode::Correct => "correct",
            ComplianceMode::None => "none",
            ComplianceMode::PracticeMisapplied => "practice_misapplied",
            ComplianceMode::WrongCritical => "wrong_critical",
        })
    }
}

impl FromStr for ComplianceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ComplianceMode::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown compliance mode {s:?}")))
    }
}

/// What a respondent does on the second attempt after seeing a strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompliancePlan {
    pub strategy_id: u8,
    pub mode: ComplianceMode,
    /// Association the instructions work against: the first-attempt score
    /// direction, with zero treated as CS↔Male.
    pub direction: Association,
    pub intensity: StrategyIntensity,
}

impl CompliancePlan {
    /// Instructed plan with full-adherence standard intensity.
    pub fn standard(strategy_id: u8, mode: ComplianceMode, direction: Association) -> CompliancePlan {
        CompliancePlan {
            strategy_id,
            mode,
            direction,
            intensity: StrategyIntensity::standard(strategy_id),
        }
    }

    /// Blocks the strategy is applied in.
    pub fn targeted_blocks(&self) -> &'static [usize] {
        let congruent: &'static [usize] = match self.direction {
            Association::CsFemale => &[6, 7],
            Association::CsMale | Association::Neutral => &[3, 4],
        };
        let incongruent: &'static [usize] = if congruent[0] == 3 { &[6, 7] } else { &[3, 4] };
        match self.mode {
            ComplianceMode::Correct => congruent,
            ComplianceMode::WrongCritical => incongruent,
            ComplianceMode::PracticeMisapplied => &[1, 2, 5],
            ComplianceMode::None => &[],
        }
    }
}

/// Probabilities of the four compliance modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeMix {
    pub correct: f64,
    pub none: f64,
    pub practice_misapplied: f64,
    pub wrong_critical: f64,
}

impl Default for ModeMix {
    fn default() -> Self {
        ModeMix {
            correct: 0.70,
            none: 0.15,
            practice_misapplied: 0.075,
            wrong_critical: 0.075,
        }
    }
}

impl ModeMix {
    pub fn only(mode: ComplianceMode) -> ModeMix {
        let mut m = ModeMix {
            correct: 0.0,
            none: 0.0,
            practice_misapplied: 0.0,
            wrong_critical: 0.0,
        };
        match mode {
            ComplianceMode::Correct => m.correct = 1.0,
            ComplianceMode::None => m.none = 1.0,
            ComplianceMode::PracticeMisapplied => m.practice_misapplied = 1.0,
            ComplianceMode::WrongCritical => m.wrong_critical = 1.0,
        }
        m
    }

    fn weights(&self) -> [f64; 4] {
        [
            self.correct,
            self.none,
            self.practice_misapplied,
            self.wrong_critical,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.weights();
        if w.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "mode probabilities must be nonnegative and sum to 1, got {w:?}"
            )));
        }
        Ok(())
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> ComplianceMode {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (mode, p) in ComplianceMode::ALL.into_iter().zip(self.weights()) {
            acc += p;
            if u < acc {
                return mode;
            }
        }
        ComplianceMode::ALL
            .into_iter()
            .zip(self.weights())
            .rev()
            .find(|(_, p)| *p > 0.0)
            .map_or(ComplianceMode::None, |(m, _)| m)
    }
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn base_timestamp() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2019, 3, 1, 9, 0, 0).unwrap()
}

/// Random stream `stream` of the master seed.
fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

impl RespondentProfile {
    /// Draws a profile from the calibration population.
    pub fn draw<R: Rng>(cal: &Calibration, participant_id: String, started_at: DateTime<Utc>, rng: &mut R) -> RespondentProfile {
        let (a, b) = cal.error_rate_beta();
        let error = Beta::new(a, b).expect("validated beta parameters").sample(rng);
        RespondentProfile {
            participant_id,
            base_log_latency_mu: cal.log_mu_mean + cal.log_mu_sd * normal(rng),
            base_log_latency_sigma: (cal.log_sigma_mean + cal.log_sigma_sd * normal(rng)).clamp(0.05, 1.0),
            congruency_effect_ms: cal.effect_mean_ms + cal.effect_sd_ms * normal(rng),
            base_error_rate: error.min(MAX_ERROR_RATE),
            practice_slowdown_ms: (cal.practice_slowdown_mean_ms + cal.practice_slowdown_sd_ms * normal(rng)).max(0.0),
            switch_cost_ms: (cal.switch_cost_mean_ms + cal.switch_cost_sd_ms * normal(rng)).max(0.0),
            fatigue_ms: cal.fatigue_mean_ms + cal.fatigue_sd_ms * normal(rng),
            familiarity_ms: cal.familiarity_mean_ms + cal.familiarity_sd_ms * normal(rng),
            practice_familiarity_ms: cal.practice_familiarity_mean_ms + cal.practice_familiarity_sd_ms * normal(rng),
            second_error_shift: cal.second_error_shift,
            started_at,
            seed: rng.random(),
        }
    }

    /// Profile with typical adult parameters and no second-attempt drift.
    pub fn typical(participant_id: &str, congruency_effect_ms: f64, seed: u64) -> RespondentProfile {
        RespondentProfile {
            participant_id: participant_id.to_string(),
            base_log_latency_mu: 6.52,
            base_log_latency_sigma: 0.3,
            congruency_effect_ms,
            base_error_rate: 0.06,
            practice_slowdown_ms: 60.0,
            switch_cost_ms: 0.0,
            fatigue_ms: 0.0,
            familiarity_ms: 0.0,
            practice_familiarity_ms: 0.0,
            second_error_shift: 0.0,
            started_at: base_timestamp(),
            seed,
        }
    }

    fn sanitized(&self) -> RespondentProfile {
        let mut p = self.clone();
        if !(p.base_log_latency_sigma > 0.0) {
            log::warn!("{}: non-positive latency sigma clamped", p.participant_id);
            p.base_log_latency_sigma = 0.05;
        }
        if !(0.0..=MAX_ERROR_RATE).contains(&p.base_error_rate) {
            log::warn!("{}: base error rate clamped to [0, {MAX_ERROR_RATE}]", p.participant_id);
            p.base_error_rate = p.base_error_rate.clamp(0.0, MAX_ERROR_RATE);
        }
        if p.practice_slowdown_ms < 0.0 {
            log::warn!("{}: negative practice slowdown clamped to 0", p.participant_id);
            p.practice_slowdown_ms = 0.0;
        }
        if p.switch_cost_ms < 0.0 {
            log::warn!("{}: negative switch cost clamped to 0", p.participant_id);
            p.switch_cost_ms = 0.0;
        }
        p
    }
}

/// Item sequence for one block: categories balanced, each category's words
/// cycled in shuffled order, then shuffled with no immediate repeats.
fn item_order<R: Rng>(spec: &BlockSpec, rng: &mut R) -> Vec<(String, crate::session::Category)> {
    let cats: Vec<_> = spec.categories().collect();
    let mut pool = Vec::with_capacity(spec.trial_count);
    let mut words: Vec<Vec<&str>> = cats
        .iter()
        .map(|c| {
            let mut w = c.items().to_vec();
            w.shuffle(rng);
            w
        })
        .collect();
    for i in 0..spec.trial_count {
        let c = i % cats.len();
        let round = i / cats.len();
        if round > 0 && round % 8 == 0 {
            words[c].shuffle(rng);
        }
        pool.push((words[c][round % 8].to_string(), cats[c]));
    }
    for _ in 0..1000 {
        pool.shuffle(rng);
        if pool.windows(2).all(|w| w[0].0 != w[1].0) {
            return pool;
        }
    }
    // Rare fallback: repair adjacent repeats by swapping forward.
    for i in 1..pool.len() {
        if pool[i].0 == pool[i - 1].0 {
            if let Some(j) = (i + 1..pool.len()).find(|&j| pool[j].0 != pool[i - 1].0 && (j + 1 >= pool.len() || pool[j + 1].0 != pool[i].0)) {
                pool.swap(i, j);
            }
        }
    }
    pool
}

/// Generates one attempt. `plan` carries the strategy shown before a second
/// attempt; its mode decides whether and where the strategy is applied.
pub fn simulate_attempt(p: &RespondentProfile, attempt: u8, plan: Option<&CompliancePlan>) -> Session {
    let p = p.sanitized();
    let attempt = attempt.clamp(1, 2);
    let plan = if attempt == 1 {
        if plan.is_some() {
            log::warn!("{}: plan ignored on a first attempt", p.participant_id);
        }
        None
    } else {
        plan
    };
    let mut trial_rng = stream_rng(p.seed, 2 * attempt as u64);
    let mut aux_rng = stream_rng(p.seed, 2 * attempt as u64 + 1);

    let targeted: &[usize] = plan.map_or(&[], |pl| pl.targeted_blocks());
    let intensity = plan.map(|pl| pl.intensity);
    let (second_offset, error_shift) = if attempt == 2 {
        (p.fatigue_ms - p.familiarity_ms, p.second_error_shift)
    } else {
        (0.0, 0.0)
    };
    let incongruent: [usize; 2] = if p.congruency_effect_ms >= 0.0 { [6, 7] } else { [3, 4] };

    let mut blocks = Vec::with_capacity(7);
    for spec in standard_block_layout() {
        let items = item_order(&spec, &mut aux_rng);
        let mut block = Block::empty(&spec);
        let is_targeted = targeted.contains(&spec.index);
        let mut adjust = second_offset;
        if !spec.is_critical() {
            adjust += p.practice_slowdown_ms;
            if attempt == 2 {
                adjust -= p.practice_familiarity_ms;
            }
        }
        if spec.index == 5 {
            adjust += p.switch_cost_ms;
        }
        if incongruent.contains(&spec.index) {
            adjust += p.congruency_effect_ms.abs();
        }
        let base_error = (p.base_error_rate + error_shift).clamp(0.0, MAX_ERROR_RATE);
        for (item, category) in items {
            // Fixed draw order per trial keeps streams aligned across intensities.
            let z_latency = normal(&mut trial_rng);
            let u_error: f64 = trial_rng.random();
            let u_apply: f64 = trial_rng.random();
            let z_delay = normal(&mut trial_rng);

            let mut latency = (p.base_log_latency_mu + p.base_log_latency_sigma * z_latency).exp() + adjust;
            let mut error_prob = base_error;
            if let (true, Some(it)) = (is_targeted, intensity) {
                if u_apply < it.adherence {
                    latency += (it.delay_mean_ms + it.delay_sd_ms * z_delay).max(0.0);
                    if it.error_odds_multiplier != 1.0 && error_prob > 0.0 {
                        let odds = error_prob / (1.0 - error_prob) * it.error_odds_multiplier;
                        error_prob = odds / (1.0 + odds);
                    }
                }
            }
            let correct = u_error >= error_prob;
            let side = spec.side_of(category).expect("item category is in block");
            block.trials.push(Trial {
                item,
                category,
                correct_side: side,
                key: if correct { side } else { side.opposite() },
                latency_ms: latency.max(MIN_LATENCY_MS),
                correct,
            });
        }
        blocks.push(block);
    }

    if let (Some(it), false) = (intensity, targeted.is_empty()) {
        if it.intended_errors > 0.0 {
            apply_intentional_errors(&mut blocks, targeted, &it, &mut aux_rng);
        }
    }

    Session {
        session_id: format!("{}-a{attempt}", p.participant_id),
        participant_id: p.participant_id.clone(),
        attempt,
        strategy_id: plan.map_or(0, |pl| pl.strategy_id),
        created_at: p.started_at + Duration::minutes(20 * (attempt as i64 - 1)),
        blocks,
    }
}

/// Forces about `intended_errors` uniformly chosen targeted trials to be wrong.
/// The wrong trial and the one after it (post-error slowing) both gain
/// `hesitation_ms`; the scoring penalty replaces the wrong trial's own latency,
/// so only the slowed follow-up moves the D-score.
fn apply_intentional_errors<R: Rng>(blocks: &mut [Block], targeted: &[usize], it: &StrategyIntensity, rng: &mut R) {
    let slots: Vec<(usize, usize)> = blocks
        .iter()
        .filter(|b| targeted.contains(&b.index))
        .flat_map(|b| (0..b.trials.len()).map(move |t| (b.index, t)))
        .collect();
    let trials = (2.0 * it.intended_errors).round() as u64;
    let count = Binomial::new(trials, 0.5)
        .map(|d| d.sample(rng) as usize)
        .unwrap_or(0)
        .min(slots.len());
    for &(b, t) in slots.choose_multiple(rng, count) {
        let block = &mut blocks[b - 1];
        let trial = &mut block.trials[t];
        if trial.correct {
            trial.correct = false;
            trial.key = trial.correct_side.opposite();
        }
        trial.latency_ms += it.hesitation_ms;
        if let Some(next) = block.trials.get_mut(t + 1) {
            next.latency_ms += it.hesitation_ms;
        }
    }
}

/// Second-attempt plan for one participant, drawn with the cohort's rules.
fn draw_plan<R: Rng>(cal: &Calibration, mix: &ModeMix, first_score: f64, rng: &mut R) -> CompliancePlan {
    let strategy_id = rng.random_range(1..=5u8);
    let mode = mix.draw(rng);
    let adherence = Beta::new(cal.adherence_alpha, cal.adherence_beta)
        .expect("validated adherence parameters")
        .sample(rng);
    let direction = match association_of(first_score) {
        Association::CsFemale => Association::CsFemale,
        _ => Association::CsMale,
    };
    CompliancePlan {
        strategy_id,
        mode,
        direction,
        intensity: StrategyIntensity {
            adherence,
            ..cal.strategies[strategy_id as usize - 1]
        },
    }
}

/// One simulated participant with the plan that produced the second attempt.
#[derive(Debug, Clone)]
pub struct SimulatedPair {
    pub profile: RespondentProfile,
    pub plan: CompliancePlan,
    pub pair: SessionPair,
}

pub fn participant_id(index: usize) -> String {
    format!("p{:04}", index + 1)
}

/// Generates participant `index` of a cohort; independent of every other index.
pub fn simulate_pair(index: usize, mix: &ModeMix, cal: &Calibration, master_seed: u64) -> SimulatedPair {
    let mut rng = stream_rng(master_seed, index as u64);
    let started = base_timestamp() + Duration::minutes(45 * index as i64);
    let profile = RespondentProfile::draw(cal, participant_id(index), started, &mut rng);
    let first = simulate_attempt(&profile, 1, None);
    let first_score = d_score(&first).map(|r| r.d_score).unwrap_or(0.0);
    let plan = draw_plan(cal, mix, first_score, &mut rng);
    let second = simulate_attempt(&profile, 2, Some(&plan));
    SimulatedPair {
        profile,
        plan,
        pair: SessionPair { first, second },
    }
}

pub fn simulate_cohort(n_pairs: usize, mix: &ModeMix, cal: &Calibration, master_seed: u64) -> Result<Cohort> {
    simulate_cohort_with(n_pairs, mix, cal, master_seed, Execution::default())
}

pub fn simulate_cohort_with(
    n_pairs: usize,
    mix: &ModeMix,
    cal: &Calibration,
    master_seed: u64,
    exec: Execution,
) -> Result<Cohort> {
    Ok(Cohort::new(
        simulate_detailed(n_pairs, mix, cal, master_seed, exec)?
            .into_iter()
            .map(|s| s.pair)
            .collect(),
    )?)
}

/// Like [`simulate_cohort_with`] but keeps each participant's profile and plan.
pub fn simulate_detailed(
    n_pairs: usize,
    mix: &ModeMix,
    cal: &Calibration,
    master_seed: u64,
    exec: Execution,
) -> Result<Vec<SimulatedPair>> {
    if n_pairs < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 pairs, got {n_pairs}")));
    }
    mix.validate()?;
    cal.validate()?;
    Ok(exec.map_range(n_pairs, |i| simulate_pair(i, mix, cal, master_seed)))
}

/// Stream offset separating unpaired participants from paired ones.
const EXTRA_STREAM_BASE: u64 = 1 << 40;

/// First attempts of participants who never completed a second attempt.
pub fn simulate_extra_firsts(n: usize, cal: &Calibration, master_seed: u64, exec: Execution) -> Result<Vec<Session>> {
    cal.validate()?;
    Ok(exec.map_range(n, |i| {
        let mut rng = stream_rng(master_seed, EXTRA_STREAM_BASE + i as u64);
        let started = base_timestamp() + Duration::minutes(45 * i as i64 + 20);
        let profile = RespondentProfile::draw(cal, format!("u{:04}", i + 1), started, &mut rng);
        simulate_attempt(&profile, 1, None)
    }))
}
