//! IAT structure: stimuli, the fixed seven-block layout, trials, sessions and
//! cohorts, plus the canonical JSON session format.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Total trials in a complete attempt.
pub const TOTAL_TRIALS: usize = 200;
pub const BLOCK_COUNT: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    ComputerScience,
    Biology,
    Male,
    Female,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CategoryKind {
    Concept,
    Attribute,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::ComputerScience,
        Category::Biology,
        Category::Male,
        Category::Female,
    ];

    pub fn kind(self) -> CategoryKind {
        match self {
            Category::ComputerScience | Category::Biology => CategoryKind::Concept,
            Category::Male | Category::Female => CategoryKind::Attribute,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::ComputerScience => "ComputerScience",
            Category::Biology => "Biology",
            Category::Male => "Male",
            Category::Female => "Female",
        }
    }

    /// Display label for the test runner.
    pub fn label(self) -> &'static str {
        match self {
            Category::ComputerScience => "Computer Science",
            Category::Biology => "Biology",
            Category::Male => "Male",
            Category::Female => "Female",
        }
    }

    /// The eight stimulus words of this category.
    pub fn items(self) -> &'static [&'static str; 8] {
        match self {
            Category::ComputerScience => &[
                "Apps",
                "Computer",
                "Algorithm",
                "Database",
                "Internet",
                "Programming",
                "Software",
                "Technology",
            ],
            Category::Biology => &[
                "Nature",
                "Life",
                "Photosynthesis",
                "Habitat",
                "Organs",
                "Plants",
                "Species",
                "Protein",
            ],
            Category::Male => &[
                "James", "John", "Robert", "Michael", "William", "David", "Richard", "Joseph",
            ],
            Category::Female => &[
                "Mary",
                "Patricia",
                "Jennifer",
                "Elizabeth",
                "Linda",
                "Barbara",
                "Susan",
                "Margaret",
            ],
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusItem {
    pub text: String,
    pub category: Category,
}

/// All 32 stimulus items, grouped by category in [`Category::ALL`] order.
pub fn stimulus_items() -> Vec<StimulusItem> {
    Category::ALL
        .iter()
        .flat_map(|&category| {
            category.items().iter().map(move |text| StimulusItem {
                text: (*text).to_string(),
                category,
            })
        })
        .collect()
}

/// Looks up the category of a stimulus word.
pub fn category_of(text: &str) -> Option<Category> {
    Category::ALL
        .into_iter()
        .find(|c| c.items().contains(&text))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockRole {
    Practice,
    Critical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub index: usize,
    pub role: BlockRole,
    pub left: Vec<Category>,
    pub right: Vec<Category>,
    pub trial_count: usize,
}

impl BlockSpec {
    pub fn side_of(&self, category: Category) -> Option<Side> {
        if self.left.contains(&category) {
            Some(Side::Left)
        } else if self.right.contains(&category) {
            Some(Side::Right)
        } else {
            None
        }
    }

    /// Categories that appear in this block, left side first.
    pub fn categories(&self) -> impl Iterator<Item = Category> + '_ {
        self.left.iter().chain(self.right.iter()).copied()
    }

    pub fn is_critical(&self) -> bool {
        self.role == BlockRole::Critical
    }

    /// True if ComputerScience and Male share a side in this block.
    pub fn pairs_cs_with_male(&self) -> bool {
        matches!(
            (self.side_of(Category::ComputerScience), self.side_of(Category::Male)),
            (Some(a), Some(b)) if a == b
        )
    }
}

/// The fixed seven-block layout shared by every session.
///
/// | block | role     | trials | left              | right            |
/// |-------|----------|--------|-------------------|------------------|
/// | 1     | practice | 20     | Male              | Female           |
/// | 2     | practice | 20     | ComputerScience   | Biology          |
/// | 3     | critical | 20     | CS + Male         | Biology + Female |
/// | 4     | critical | 40     | CS + Male         | Biology + Female |
/// | 5     | practice | 40     | Biology           | ComputerScience  |
/// | 6     | critical | 20     | Biology + Male    | CS + Female      |
/// | 7     | critical | 40     | Biology + Male    | CS + Female      |
pub fn standard_block_layout() -> Vec<BlockSpec> {
    use BlockRole::*;
    use Category::*;
    let spec = |index, role, left: &[Category], right: &[Category], trial_count| BlockSpec {
        index,
        role,
        left: left.to_vec(),
        right: right.to_vec(),
        trial_count,
    };
    vec![
        spec(1, Practice, &[Male], &[Female], 20),
        spec(2, Practice, &[ComputerScience], &[Biology], 20),
        spec(3, Critical, &[ComputerScience, Male], &[Biology, Female], 20),
        spec(4, Critical, &[ComputerScience, Male], &[Biology, Female], 40),
        spec(5, Practice, &[Biology], &[ComputerScience], 40),
        spec(6, Critical, &[Biology, Male], &[ComputerScience, Female], 20),
        spec(7, Critical, &[Biology, Male], &[ComputerScience, Female], 40),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub item: String,
    pub category: Category,
    pub correct_side: Side,
    /// Side of the first keypress.
    pub key: Side,
    /// Stimulus onset to first keypress.
    pub latency_ms: f64,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub index: usize,
    pub role: BlockRole,
    pub left: Vec<Category>,
    pub right: Vec<Category>,
    pub trials: Vec<Trial>,
}

impl Block {
    pub fn empty(spec: &BlockSpec) -> Block {
        Block {
            index: spec.index,
            role: spec.role,
            left: spec.left.clone(),
            right: spec.right.clone(),
            trials: Vec::with_capacity(spec.trial_count),
        }
    }

    pub fn latencies(&self) -> impl Iterator<Item = f64> + '_ {
        self.trials.iter().map(|t| t.latency_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub participant_id: String,
    pub attempt: u8,
    /// 0 for no strategy, otherwise the deception strategy shown before this attempt.
    pub strategy_id: u8,
    pub created_at: DateTime<Utc>,
    pub blocks: Vec<Block>,
}

impl Session {
    /// Block by 1-based index.
    pub fn block(&self, index: usize) -> Option<&Block> {
        self.blocks.iter().find(|b| b.index == index)
    }

    pub fn trial_count(&self) -> usize {
        self.blocks.iter().map(|b| b.trials.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionPair {
    pub first: Session,
    pub second: Session,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Cohort {
    pub pairs: Vec<SessionPair>,
}

impl Cohort {
    /// Builds a cohort, checking the pairing invariants.
    pub fn new(pairs: Vec<SessionPair>) -> Result<Cohort> {
        let mut seen = std::collections::HashSet::new();
        for p in &pairs {
            if p.first.attempt != 1 || p.second.attempt != 2 {
                return Err(Error::InvalidArgument(format!(
                    "pair for participant {} is not (attempt 1, attempt 2)",
                    p.first.participant_id
                )));
            }
            if p.first.participant_id != p.second.participant_id {
                return Err(Error::InvalidArgument(format!(
                    "pair mixes participants {} and {}",
                    p.first.participant_id, p.second.participant_id
                )));
            }
            if !seen.insert(p.first.participant_id.clone()) {
                return Err(Error::InvalidArgument(format!(
                    "participant {} appears in more than one pair",
                    p.first.participant_id
                )));
            }
        }
        Ok(Cohort { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Sessions in archive order: first then second attempt of each pair.
    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.pairs.iter().flat_map(|p| [&p.first, &p.second])
    }
}

/// Groups archive sessions into complete pairs plus unpaired first attempts.
///
/// Participants are ordered by first appearance. Second attempts without a
/// matching first attempt are dropped, as incomplete attempts are.
pub fn group_sessions(sessions: Vec<Session>) -> Result<(Cohort, Vec<Session>)> {
    let mut order = Vec::new();
    let mut by_participant: BTreeMap<String, (Option<Session>, Option<Session>)> = BTreeMap::new();
    for s in sessions {
        let entry = by_participant
            .entry(s.participant_id.clone())
            .or_insert_with(|| {
                order.push(s.participant_id.clone());
                (None, None)
            });
        let slot = if s.attempt == 1 { &mut entry.0 } else { &mut entry.1 };
        if slot.is_some() {
            return Err(Error::InvalidArgument(format!(
                "participant {} has more than one attempt {}",
                s.participant_id, s.attempt
            )));
        }
        *slot = Some(s);
    }
    let mut pairs = Vec::new();
    let mut unpaired = Vec::new();
    for pid in order {
        match by_participant.remove(&pid) {
            Some((Some(first), Some(second))) => pairs.push(SessionPair { first, second }),
            Some((Some(first), None)) => unpaired.push(first),
            Some((None, Some(second))) => {
                log::warn!(
                    "dropping second attempt {} with no first attempt",
                    second.session_id
                );
            }
            _ => {}
        }
    }
    Ok((Cohort::new(pairs)?, unpaired))
}

/// Checks every session invariant; an empty list means the session is valid.
pub fn validate_session(s: &Session) -> Vec<String> {
    let mut v = Vec::new();
    if s.session_id.is_empty() {
        v.push("session_id is empty".to_string());
    }
    if s.participant_id.is_empty() {
        v.push("participant_id is empty".to_string());
    }
    if !(1..=2).contains(&s.attempt) {
        v.push(format!("attempt must be 1 or 2, got {}", s.attempt));
    }
    if s.strategy_id > 5 {
        v.push(format!("strategy_id must be in 0..=5, got {}", s.strategy_id));
    }
    if s.attempt == 1 && s.strategy_id != 0 {
        v.push(format!(
            "first attempt must have strategy_id 0, got {}",
            s.strategy_id
        ));
    }

    let layout = standard_block_layout();
    if s.blocks.len() != BLOCK_COUNT {
        v.push(format!(
            "expected {BLOCK_COUNT} blocks, found {}",
            s.blocks.len()
        ));
    }
    for spec in &layout {
        if !s.blocks.iter().any(|b| b.index == spec.index) {
            v.push(format!("block {} is missing", spec.index));
        }
    }
    for (pos, block) in s.blocks.iter().enumerate() {
        let b = block.index;
        if b != pos + 1 {
            v.push(format!(
                "block at position {} has index {b}, expected {}",
                pos + 1,
                pos + 1
            ));
        }
        let Some(spec) = layout.iter().find(|sp| sp.index == b) else {
            v.push(format!("block index {b} is outside 1..=7"));
            continue;
        };
        if block.role != spec.role {
            v.push(format!("block {b}: role {:?} does not match layout", block.role));
        }
        if block.left != spec.left || block.right != spec.right {
            v.push(format!("block {b}: left/right categories do not match layout"));
        }
        if block.trials.len() != spec.trial_count {
            v.push(format!(
                "block {b}: expected {} trials, found {}",
                spec.trial_count,
                block.trials.len()
            ));
        }
        for (t, trial) in block.trials.iter().enumerate() {
            let at = format!("block {b} trial {}", t + 1);
            match category_of(&trial.item) {
                Some(c) if c == trial.category => {}
                Some(c) => v.push(format!(
                    "{at}: item {:?} belongs to {c}, not {}",
                    trial.item, trial.category
                )),
                None => v.push(format!("{at}: unknown stimulus item {:?}", trial.item)),
            }
            match spec.side_of(trial.category) {
                Some(side) if side == trial.correct_side => {}
                Some(_) => v.push(format!(
                    "{at}: correct_side does not hold category {}",
                    trial.category
                )),
                None => v.push(format!(
                    "{at}: category {} is not presented in this block",
                    trial.category
                )),
            }
            if !(trial.latency_ms.is_finite() && trial.latency_ms > 0.0) {
                v.push(format!(
                    "{at}: latency_ms must be positive and finite, got {}",
                    trial.latency_ms
                ));
            }
            if trial.correct != (trial.key == trial.correct_side) {
                v.push(format!("{at}: correct flag disagrees with key and correct_side"));
            }
        }
    }
    let total = s.trial_count();
    if total != TOTAL_TRIALS && s.blocks.len() == BLOCK_COUNT {
        v.push(format!("expected {TOTAL_TRIALS} trials in total, found {total}"));
    }
    v
}

/// Parses and validates one session in the canonical JSON format.
pub fn read_session(bytes: &[u8]) -> Result<Session> {
    let s: Session = serde_json::from_slice(bytes).map_err(|e| Error::Parse(e.to_string()))?;
    let violations = validate_session(&s);
    if violations.is_empty() {
        Ok(s)
    } else {
        Err(Error::Validation(violations))
    }
}

pub fn write_session(s: &Session) -> Vec<u8> {
    serde_json::to_vec(s).expect("session serialization is infallible")
}

/// Reads a JSON-Lines cohort archive. Blank lines are skipped.
pub fn read_archive<R: BufRead>(reader: R) -> Result<Vec<Session>> {
    let mut sessions = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s = read_session(line.as_bytes()).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("line {}: {m}", n + 1)),
            Error::Validation(v) => Error::Validation(
                v.into_iter().map(|m| format!("line {}: {m}", n + 1)).collect(),
            ),
            other => other,
        })?;
        sessions.push(s);
    }
    Ok(sessions)
}

pub fn write_archive<'a, W, I>(mut w: W, sessions: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a Session>,
{
    for s in sessions {
        w.write_all(&write_session(s))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
