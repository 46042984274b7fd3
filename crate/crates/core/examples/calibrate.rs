//! Prints cohort statistics and detector F1 for the default calibration, or
//! for a calibration JSON given as the first argument.
//!
//! cargo run --release -p iat-core --example calibrate [calibration.json]
//!
//! Environment knobs: `SEEDS` (number of 67-pair cohorts, default 5),
//! `DETECTORS` (comma list, default all), `BIG` (large-cohort size, 0 skips).

use std::collections::BTreeMap;

use iat_core::detectors::{DetectorKind, TrainConfig};
use iat_core::eval::{cohort_stats, cross_validate, Scheme};
use iat_core::features::{assemble_datasets, is_reversal, select_features, DEFAULT_CORRELATION_THRESHOLD};
use iat_core::scoring::d_score;
use iat_core::simulator::{simulate_cohort, simulate_detailed, Calibration, ModeMix};
use iat_core::stats::sample_sd;
use iat_core::Execution;

fn env_or<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn main() {
    let cal: Calibration = match std::env::args().nth(1) {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap(),
        None => Calibration::default(),
    };
    let mix = ModeMix::default();
    let big_n: usize = env_or("BIG", 1000);
    if big_n > 0 {
        let big = simulate_cohort(big_n, &mix, &cal, 1).unwrap();
        print!("{}", cohort_stats(&big).unwrap().render_table());

        let detailed = simulate_detailed(big_n, &mix, &cal, 1, Execution::default()).unwrap();
        let scores: Vec<(f64, f64)> = detailed
            .iter()
            .map(|s| {
                (
                    d_score(&s.pair.first).map_or(0.0, |r| r.d_score),
                    d_score(&s.pair.second).map_or(0.0, |r| r.d_score),
                )
            })
            .collect();
        let firsts: Vec<f64> = scores.iter().map(|s| s.0).collect();
        let sigma = sample_sd(&firsts);
        let mut by_mode: BTreeMap<String, (usize, f64, usize)> = BTreeMap::new();
        let mut by_strategy: BTreeMap<u8, (usize, f64, usize)> = BTreeMap::new();
        for (s, &(d1, d2)) in detailed.iter().zip(&scores) {
            let rev = is_reversal(d1, d2, sigma) as usize;
            let e = by_mode.entry(s.plan.mode.to_string()).or_default();
            *e = (e.0 + 1, e.1 + d2 - d1, e.2 + rev);
            if s.plan.mode.to_string() == "correct" {
                let e = by_strategy.entry(s.plan.strategy_id).or_default();
                *e = (e.0 + 1, e.1 + d2 - d1, e.2 + rev);
            }
        }
        for (k, (n, dd, r)) in by_mode {
            println!("mode {k:<20} n={n:>4} mean Δ={:+.3} reversal={:.2}", dd / n as f64, r as f64 / n as f64);
        }
        for (k, (n, dd, r)) in by_strategy {
            println!("correct strategy {k} n={n:>4} mean Δ={:+.3} reversal={:.2}", dd / n as f64, r as f64 / n as f64);
        }
    }

    let kinds: Vec<DetectorKind> = std::env::var("DETECTORS")
        .map(|v| v.split(',').map(|k| k.parse().unwrap()).collect())
        .unwrap_or_else(|_| DetectorKind::ALL.to_vec());
    let seeds: Vec<u64> = (1..=env_or("SEEDS", 5u64)).collect();
    let mut totals = vec![[0.0; 2]; kinds.len()];
    let mut reversals = 0;
    for &seed in &seeds {
        let cohort = simulate_cohort(67, &mix, &cal, seed).unwrap();
        let ds = assemble_datasets(&cohort, &[]).unwrap();
        reversals += ds.reversals;
        let mut line = format!("seed {seed}: reversals {:>2}/67 pruned n={}", ds.reversals, ds.pruned.len());
        for (v, m) in [ds.unpruned, ds.pruned].into_iter().enumerate() {
            let m = select_features(&m, DEFAULT_CORRELATION_THRESHOLD).unwrap();
            if seed == 1 {
                line.push_str(&format!(" [{} feats]", m.selected_indices().len()));
            }
            for (k, &kind) in kinds.iter().enumerate() {
                let cfg = TrainConfig { seed, ..TrainConfig::default() };
                let f1 = cross_validate(kind, &m, &cfg, Scheme::Loocv).unwrap().weighted_f1;
                totals[k][v] += f1;
                line.push_str(&format!(" {}{}={f1:.3}", kind, if v == 0 { "U" } else { "P" }));
            }
        }
        println!("{line}");
    }
    println!("mean reversals {:.1}", reversals as f64 / seeds.len() as f64);
    for (k, kind) in kinds.iter().enumerate() {
        println!(
            "{:<12} unpruned {:.3} pruned {:.3}",
            kind.to_string(),
            totals[k][0] / seeds.len() as f64,
            totals[k][1] / seeds.len() as f64
        );
    }
}
