//! Deterministic hand-built sessions for tests, benches and examples.

use chrono::{DateTime, TimeZone, Utc};

use crate::session::{standard_block_layout, Block, BlockSpec, Session, Trial};

pub fn fixed_timestamp() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2019, 3, 1, 12, 0, 0).unwrap()
}

/// Builds a layout-conformant session. `trial(spec, i)` returns the latency
/// and correctness of trial `i` in block `spec`; items cycle through the
/// block's categories and their word lists.
pub fn build_session<F>(session_id: &str, participant_id: &str, attempt: u8, mut trial: F) -> Session
where
    F: FnMut(&BlockSpec, usize) -> (f64, bool),
{
    let blocks = standard_block_layout()
        .iter()
        .map(|spec| {
            let cats: Vec<_> = spec.categories().collect();
            let mut block = Block::empty(spec);
            for i in 0..spec.trial_count {
                let category = cats[i % cats.len()];
                let side = spec.side_of(category).expect("category in block");
                let (latency_ms, correct) = trial(spec, i);
                block.trials.push(Trial {
                    item: category.items()[(i / cats.len()) % 8].to_string(),
                    category,
                    correct_side: side,
                    key: if correct { side } else { side.opposite() },
                    latency_ms,
                    correct,
                });
            }
            block
        })
        .collect();
    Session {
        session_id: session_id.to_string(),
        participant_id: participant_id.to_string(),
        attempt,
        strategy_id: 0,
        created_at: fixed_timestamp(),
        blocks,
    }
}

/// All-correct session with `latency(block_index, trial_index)`.
pub fn uniform_session<F>(latency: F) -> Session
where
    F: Fn(usize, usize) -> f64,
{
    build_session("s1", "p1", 1, |spec, i| (latency(spec.index, i), true))
}
