//! Cross-validation harness, classification metrics, and cohort statistics.

pub mod cohort;
pub mod cv;
pub mod metrics;

use std::fmt::Write as _;

pub use cohort::{cohort_stats, CohortStats};
pub use cv::{cross_validate, cross_validate_with, CvOptions, EvalReport, Scheme, SelectionMode};
pub use metrics::{metrics, Confusion, Metrics};

use crate::detectors::DetectorKind;
use crate::features::Variant;

/// Weighted F1 per detector (rows) × dataset variant (columns).
pub fn render_f1_table(reports: &[EvalReport]) -> String {
    let mut kinds: Vec<DetectorKind> = Vec::new();
    for r in reports {
        if !kinds.contains(&r.detector) {
            kinds.push(r.detector);
        }
    }
    let size = |v: Variant| {
        reports
            .iter()
            .find(|r| r.variant == v)
            .map_or(String::new(), |r| format!(" (n={})", r.n))
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} | {:>18} | {:>18}",
        "Method",
        format!("Unpruned{}", size(Variant::Unpruned)),
        format!("Pruned{}", size(Variant::Pruned))
    );
    for kind in kinds {
        let cell = |v: Variant| {
            reports
                .iter()
                .find(|r| r.detector == kind && r.variant == v)
                .map_or("-".to_string(), |r| format!("{:.3}", r.weighted_f1))
        };
        let _ = writeln!(
            out,
            "{:<24} | {:>18} | {:>18}",
            kind.display_name(),
            cell(Variant::Unpruned),
            cell(Variant::Pruned)
        );
    }
    out
}
