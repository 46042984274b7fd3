//! Deception-strategy instructions shown between the two attempts.

use iat_core::scoring::{association_of, Association};
use iat_core::session::{standard_block_layout, Category};
use iat_core::simulator::{ComplianceMode, CompliancePlan};
use serde::Serialize;

/// The five strategies, indexed by id − 1.
pub const DESCRIPTIONS: [&str; 5] = [
    "Make about 10 errors intentionally",
    "Say \"one Mississippi\" before pressing the appropriate key",
    "Put your hands in your lap between keypresses",
    "Cross your hands on the keyboard",
    "Touch your nose before pressing the appropriate key",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyInstruction {
    pub strategy_id: u8,
    pub description: String,
    /// The association the first score showed, which the strategy works against.
    pub direction: Association,
    /// Critical blocks the strategy should be used in.
    pub target_blocks: Vec<usize>,
    /// Human-readable pairing of those blocks, e.g. "Computer Science + Male".
    pub target_pairing: String,
    pub instruction: String,
}

/// Direction a first-attempt score is steered away from; zero counts as CS↔Male.
pub fn direction_for(score: f64) -> Association {
    match association_of(score) {
        Association::CsFemale => Association::CsFemale,
        _ => Association::CsMale,
    }
}

pub fn instruction(strategy_id: u8, score: f64) -> StrategyInstruction {
    assert!((1..=5).contains(&strategy_id), "strategy id must be in 1..=5");
    let direction = direction_for(score);
    let plan = CompliancePlan::standard(strategy_id, ComplianceMode::Correct, direction);
    let target_blocks = plan.targeted_blocks().to_vec();
    let layout = standard_block_layout();
    let spec = &layout[target_blocks[0] - 1];
    let cs_side = spec.side_of(Category::ComputerScience).expect("critical blocks show both concepts");
    let partner = [Category::Male, Category::Female]
        .into_iter()
        .find(|&g| spec.side_of(g) == Some(cs_side))
        .expect("critical blocks pair each concept with an attribute");
    let target_pairing = format!("{} + {}", Category::ComputerScience.label(), partner.label());
    let description = DESCRIPTIONS[strategy_id as usize - 1].to_string();
    let action = match strategy_id {
        1 => "make about 10 errors on purpose".to_string(),
        _ => lowercase_first(&description),
    };
    let instruction = format!(
        "On your next attempt, whenever {} share a response key, {action}. Respond normally in every other block.",
        target_pairing.replace(" + ", " and ")
    );
    StrategyInstruction {
        strategy_id,
        description,
        direction,
        target_blocks,
        target_pairing,
        instruction,
    }
}

fn lowercase_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}
