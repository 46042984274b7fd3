//! Acceptance suite: runs each criterion end to end through the `iat` binary
//! (or the library for the numerical checks) and prints one PASS/FAIL line
//! per criterion. Exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use iat_core::detectors::mlp::Network;
use iat_core::detectors::{fit, DetectorKind, Parameters, TrainConfig};
use iat_core::eval::cv::{fit_fold, make_folds};
use iat_core::eval::{metrics, Confusion, Scheme, SelectionMode};
use iat_core::features::{block_features, select_features, FeatureMatrix, FeatureVector, Label, Variant};
use iat_core::fixtures::build_session;
use iat_core::scoring::d_score;
use iat_core::session::{Category, Session, Side, Trial};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Check = Result<String, String>;

fn iat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iat"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> Result<Vec<u8>, String> {
    if out.status.success() {
        Ok(out.stdout)
    } else {
        Err(format!("iat exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

/// `iat simulate <sim> | iat stats --format json`
fn simulate_into_stats(sim: &[&str]) -> Result<Value, String> {
    let mut producer = Command::new(env!("CARGO_BIN_EXE_iat"))
        .arg("simulate")
        .args(sim)
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    let consumer = Command::new(env!("CARGO_BIN_EXE_iat"))
        .args(["stats", "--format", "json"])
        .env("RUST_LOG", "warn")
        .stdin(Stdio::from(producer.stdout.take().unwrap()))
        .output()
        .map_err(|e| e.to_string())?;
    let status = producer.wait().map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("simulate exited {status}"));
    }
    serde_json::from_slice(&ok(consumer)?).map_err(|e| e.to_string())
}

fn num(v: &Value, path: &[&str]) -> f64 {
    path.iter().fold(v, |v, k| &v[*k]).as_f64().unwrap_or(f64::NAN)
}

fn within(name: &str, got: f64, target: f64, tol: f64, problems: &mut Vec<String>) -> String {
    if (got - target).abs() > tol {
        problems.push(format!("{name} {got:.3} outside {target} ± {tol}"));
    }
    format!("{name} {got:.3}")
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let stats = simulate_into_stats(&["--pairs", "1000", "--seed", "1"])?;
    let elapsed = start.elapsed();
    let mut problems = Vec::new();
    let mut parts = vec![
        within("RT", num(&stats, &["first", "mean_rt_s", "mean"]), 0.802, 0.05, &mut problems),
        within("error", num(&stats, &["first", "error_rate", "mean"]), 0.069, 0.02, &mut problems),
        within("score", num(&stats, &["first", "d_score", "mean"]), 0.395, 0.10, &mut problems),
        within("second score", num(&stats, &["second", "d_score", "mean"]), 0.010, 0.15, &mut problems),
    ];
    for key in ["t_mean_rt", "t_error_rate", "t_d_score"] {
        let p = num(&stats, &[key, "p_value"]);
        if !(p < 0.01) {
            problems.push(format!("{key} p = {p}"));
        }
        parts.push(format!("{key} p={p:.1e}"));
    }
    if elapsed > Duration::from_secs(60) {
        problems.push(format!("runtime {elapsed:.1?} over 60 s"));
    }
    parts.push(format!("{:.1}s", elapsed.as_secs_f64()));
    report(parts, problems)
}

fn criterion_2() -> Check {
    let stats = simulate_into_stats(&["--pairs", "67"])?;
    let reversals = stats["reversals"].as_u64().unwrap_or(0);
    let detail = vec![format!("{reversals}/67 one-SD reversals (target 51 ± 8)")];
    let problems = if (43..=59).contains(&reversals) { vec![] } else { vec!["reversal count out of range".into()] };
    report(detail, problems)
}

/// Mean weighted F1 per (detector, variant) over the seeds.
fn detection_runs(dir: &Path, seeds: &[u64]) -> Result<(BTreeMap<(String, String), f64>, Duration), String> {
    let start = Instant::now();
    let mut sums: BTreeMap<(String, String), f64> = BTreeMap::new();
    for &seed in seeds {
        let archive = dir.join(format!("cohort{seed}.jsonl"));
        let s = seed.to_string();
        ok(iat(&["simulate", "--pairs", "67", "--seed", &s, "--out", archive.to_str().unwrap()]))?;
        let out = ok(iat(&["eval", archive.to_str().unwrap(), "--seed", &s, "--scheme", "loocv"]))?;
        let reports: Vec<Value> = serde_json::from_slice(&out).map_err(|e| e.to_string())?;
        for r in reports {
            let key = (r["detector"].as_str().unwrap().to_string(), r["variant"].as_str().unwrap().to_string());
            *sums.entry(key).or_default() += r["weighted_f1"].as_f64().unwrap();
        }
    }
    for v in sums.values_mut() {
        *v /= seeds.len() as f64;
    }
    Ok((sums, start.elapsed()))
}

fn criterion_3(f1: &BTreeMap<(String, String), f64>, elapsed: Duration) -> Check {
    let get = |d: &str, v: &str| f1.get(&(d.to_string(), v.to_string())).copied().unwrap_or(f64::NAN);
    let mut problems = Vec::new();
    let mlp_u = get("mlp", "unpruned");
    let mlp_p = get("mlp", "pruned");
    if !(0.70..=0.88).contains(&mlp_u) {
        problems.push(format!("MLP unpruned {mlp_u:.3} outside [0.70, 0.88]"));
    }
    if !(mlp_p >= mlp_u - 0.02) {
        problems.push(format!("MLP pruned {mlp_p:.3} below unpruned − 0.02"));
    }
    for d in ["logistic", "naive_bayes"] {
        for v in ["unpruned", "pruned"] {
            if !(get(d, v) >= 0.65) {
                problems.push(format!("{d} {v} {:.3} below 0.65", get(d, v)));
            }
        }
    }
    if elapsed > Duration::from_secs(600) {
        problems.push(format!("runtime {elapsed:.0?} over 10 min"));
    }
    let detail = vec![
        format!("MLP {mlp_u:.3}/{mlp_p:.3}"),
        format!("logistic {:.3}/{:.3}", get("logistic", "unpruned"), get("logistic", "pruned")),
        format!("NB {:.3}/{:.3}", get("naive_bayes", "unpruned"), get("naive_bayes", "pruned")),
        format!("(unpruned/pruned, 5 seeds, {:.0}s)", elapsed.as_secs_f64()),
    ];
    report(detail, problems)
}

fn criterion_4(f1: &BTreeMap<(String, String), f64>) -> Check {
    let get = |d: &str, v: &str| f1.get(&(d.to_string(), v.to_string())).copied().unwrap_or(f64::NAN);
    let (ratio_u, ratio_p, mlp_u) = (get("ratio", "unpruned"), get("ratio", "pruned"), get("mlp", "unpruned"));
    let mut problems = Vec::new();
    if !(mlp_u - ratio_u >= 0.05) {
        problems.push(format!("gap to MLP only {:.3}", mlp_u - ratio_u));
    }
    if !(ratio_p <= ratio_u + 0.05) {
        problems.push(format!("ratio pruned {ratio_p:.3} exceeds unpruned + 0.05"));
    }
    report(
        vec![format!("ratio {ratio_u:.3}/{ratio_p:.3}, MLP unpruned {mlp_u:.3}, gap {:.3}", mlp_u - ratio_u)],
        problems,
    )
}

fn report(parts: Vec<String>, problems: Vec<String>) -> Check {
    if problems.is_empty() {
        Ok(parts.join(", "))
    } else {
        Err(format!("{} [{}]", problems.join("; "), parts.join(", ")))
    }
}

// ---- criterion 5: numerical properties against independent oracles ----

fn rows_matrix(xs: &[Vec<f64>], labels: &[Label]) -> FeatureMatrix {
    let p = xs[0].len();
    FeatureMatrix {
        rows: xs
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (x, &label))| FeatureVector {
                session_id: format!("r{i:03}"),
                label,
                values: x.clone(),
                ratio: Some(1.0 + x[0].abs()),
            })
            .collect(),
        feature_names: (0..p).map(|j| format!("x{j}")).collect(),
        selected: vec![true; p],
        variant: Variant::Unpruned,
    }
}

fn random_problem(rng: &mut ChaCha8Rng, n: usize, p: usize) -> (Vec<Vec<f64>>, Vec<Label>) {
    let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let ls = (0..n).map(|i| if i % 2 == 0 { Label::First } else { Label::Second }).collect();
    (xs, ls)
}

fn gradient_check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (xs, ls) = random_problem(&mut rng, 6, 4);
    let ys: Vec<f64> = ls.iter().map(|l| l.target()).collect();
    let net = Network::init(4, 13, &mut rng);
    let analytic = net.gradients(&xs, &ys).flatten();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..analytic.len() {
        let loss_at = |delta: f64| {
            let mut n = net.clone();
            let (hidden, inputs) = (n.b1.len(), n.w1[0].len());
            match k {
                k if k < hidden * inputs => n.w1[k / inputs][k % inputs] += delta,
                k if k < hidden * inputs + hidden => n.b1[k - hidden * inputs] += delta,
                k if k < hidden * inputs + 2 * hidden => n.w2[k - hidden * inputs - hidden] += delta,
                _ => n.b2 += delta,
            }
            n.loss(&xs, &ys)
        };
        let numeric = (loss_at(h) - loss_at(-h)) / (2.0 * h);
        let scale = analytic[k].abs().max(numeric.abs());
        if scale > 1e-7 {
            worst = worst.max((analytic[k] - numeric).abs() / scale);
        }
    }
    if worst <= 1e-4 {
        Ok(format!("gradient rel err {worst:.1e}"))
    } else {
        Err(format!("gradient rel err {worst:.1e}"))
    }
}

fn naive_bayes_closed_form() -> Check {
    let xs = vec![vec![1.0, 2.0], vec![4.0, 0.0], vec![3.0, 2.0], vec![6.0, 1.0], vec![8.0, 2.0]];
    let ls = [Label::First, Label::Second, Label::First, Label::Second, Label::Second];
    let cfg = TrainConfig { normalize: false, ..TrainConfig::default() };
    let model = fit(DetectorKind::NaiveBayes, &rows_matrix(&xs, &ls), &cfg).map_err(|e| e.to_string())?;
    let Parameters::NaiveBayes(p) = &model.parameters else { return Err("not NB".into()) };
    let expected = (
        [0.4, 0.6],
        [vec![2.0, 2.0], vec![6.0, 1.0]],
        [vec![1.0, 1e-9], vec![8.0 / 3.0, 2.0 / 3.0]],
    );
    if (p.priors, p.means.clone(), p.variances.clone()) == expected {
        Ok("NB moments exact".into())
    } else {
        Err(format!("NB moments {:?} {:?} {:?}", p.priors, p.means, p.variances))
    }
}

/// D600 from plain lists, independent of the scoring module.
fn oracle_d(blocks: &BTreeMap<usize, Vec<(f64, bool)>>) -> f64 {
    let replaced = |b: &[(f64, bool)]| -> Vec<f64> {
        let correct: Vec<f64> = b.iter().filter(|t| t.1).map(|t| t.0).collect();
        let fill = correct.iter().sum::<f64>() / correct.len() as f64 + 600.0;
        b.iter().map(|&(l, c)| if c { l } else { fill }).collect()
    };
    let pair = |fast: usize, slow: usize| {
        let a = replaced(&blocks[&fast]);
        let b = replaced(&blocks[&slow]);
        let all: Vec<f64> = a.iter().chain(&b).copied().collect();
        let m = all.iter().sum::<f64>() / all.len() as f64;
        let sd = (all.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (all.len() - 1) as f64).sqrt();
        (b.iter().sum::<f64>() / b.len() as f64 - a.iter().sum::<f64>() / a.len() as f64) / sd
    };
    (pair(3, 6) + pair(4, 7)) / 2.0
}

fn session_from(blocks: &BTreeMap<usize, Vec<(f64, bool)>>) -> Session {
    build_session("s", "p", 1, |spec, i| blocks[&spec.index][i])
}

fn random_blocks(rng: &mut ChaCha8Rng, errors: bool) -> BTreeMap<usize, Vec<(f64, bool)>> {
    let sizes = [20, 20, 20, 40, 40, 20, 40];
    let slow = rng.random_range(-300.0..300.0);
    (1..=7)
        .map(|b| {
            let shift = if b >= 6 { slow } else { 0.0 };
            let trials = (0..sizes[b - 1])
                .map(|_| (rng.random_range(320.0..2400.0) + shift, !(errors && rng.random_bool(0.1))))
                .collect();
            (b, trials)
        })
        .collect()
}

fn d_score_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst_oracle: f64 = 0.0;
    let mut worst_swap: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    for case in 0..300 {
        let blocks = random_blocks(&mut rng, true);
        let d = d_score(&session_from(&blocks)).map_err(|e| e.to_string())?.d_score;
        let expected = oracle_d(&blocks);
        worst_oracle = worst_oracle.max((d - expected).abs() / expected.abs().max(1e-12));

        let mut swapped = blocks.clone();
        for (a, b) in [(3, 6), (4, 7)] {
            swapped.insert(a, blocks[&b].clone());
            swapped.insert(b, blocks[&a].clone());
        }
        let e = d_score(&session_from(&swapped)).map_err(|e| e.to_string())?.d_score;
        worst_swap = worst_swap.max((d + e).abs() / d.abs().max(1.0));

        // the fixed error penalty only scales with error-free sessions
        let clean = random_blocks(&mut rng, false);
        let k = 0.5 + (case % 7) as f64 * 0.2;
        let scaled = clean.iter().map(|(&b, t)| (b, t.iter().map(|&(l, c)| (l * k, c)).collect())).collect();
        let d0 = d_score(&session_from(&clean)).map_err(|e| e.to_string())?.d_score;
        let d1 = d_score(&session_from(&scaled)).map_err(|e| e.to_string())?.d_score;
        worst_scale = worst_scale.max((d0 - d1).abs() / d0.abs().max(1.0));
    }
    let detail = format!("d oracle {worst_oracle:.1e}, antisymmetry {worst_swap:.1e}, scale {worst_scale:.1e}");
    if worst_oracle <= 1e-9 && worst_swap <= 1e-9 && worst_scale <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn summary_oracle(lat: &[f64], errors: usize) -> [f64; 8] {
    let n = lat.len() as f64;
    let mut s = lat.to_vec();
    // insertion sort, independent of the library's sort
    for i in 1..s.len() {
        let mut j = i;
        while j > 0 && s[j - 1] > s[j] {
            s.swap(j - 1, j);
            j -= 1;
        }
    }
    let q = |p: f64| {
        let h = p * (n - 1.0);
        let lo = h.floor() as usize;
        s[lo] + (h - lo as f64) * (s[h.ceil() as usize] - s[lo])
    };
    let m = lat.iter().sum::<f64>() / n;
    let m2 = lat.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = lat.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    [
        errors as f64 / n,
        lat.iter().filter(|&&x| x < 300.0).count() as f64 / n,
        s[0],
        q(0.25),
        q(0.5),
        q(0.75),
        s[s.len() - 1],
        if m2 == 0.0 { 0.0 } else { m3 / m2.powf(1.5) },
    ]
}

fn summary_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(3..45);
        let lat: Vec<f64> = (0..n).map(|_| rng.random_range(150.0..3000.0f64).round()).collect();
        let wrong: Vec<bool> = (0..n).map(|_| rng.random_bool(0.1)).collect();
        let trials: Vec<Trial> = lat
            .iter()
            .zip(&wrong)
            .map(|(&l, &w)| Trial {
                item: "Male".into(),
                category: Category::Male,
                correct_side: Side::Left,
                key: if w { Side::Right } else { Side::Left },
                latency_ms: l,
                correct: !w,
            })
            .collect();
        let got = block_features(&trials).map_err(|e| e.to_string())?;
        let expected = summary_oracle(&lat, wrong.iter().filter(|&&w| w).count());
        for (g, e) in got.iter().zip(&expected) {
            worst = worst.max((g - e).abs() / e.abs().max(1.0));
        }
    }
    if worst <= 1e-9 {
        Ok(format!("five-number summary and skewness {worst:.1e}"))
    } else {
        Err(format!("summary oracle mismatch {worst:.1e}"))
    }
}

fn selection_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let (mut xs, ls) = random_problem(&mut rng, 40, 6);
    for x in &mut xs {
        let copy = 3.0 * x[1] + 2.0;
        x.insert(4, copy);
    }
    let m = rows_matrix(&xs, &ls);
    let once = select_features(&m, 0.75).map_err(|e| e.to_string())?;
    let twice = select_features(&once, 0.75).map_err(|e| e.to_string())?;
    if once.selected != twice.selected {
        return Err("selection is not idempotent".into());
    }
    if once.selected[4] || !once.selected[1] {
        return Err(format!("duplicate column handling wrong: {:?}", once.selected));
    }
    Ok("selection idempotent, duplicate dropped".into())
}

fn no_leakage() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (xs, ls) = random_problem(&mut rng, 14, 3);
    let m = rows_matrix(&xs, &ls);
    let cfg = TrainConfig { epochs: 15, ..TrainConfig::default() };
    let folds = make_folds(&m.labels(), Scheme::Loocv, 3).map_err(|e| e.to_string())?;
    if folds.len() != m.len() {
        return Err(format!("{} folds for {} rows", folds.len(), m.len()));
    }
    let mut fits = 0;
    for kind in DetectorKind::ALL {
        for fold in &folds {
            let mut corrupted = m.clone();
            for &i in &fold.test {
                corrupted.rows[i].values.iter_mut().for_each(|v| *v = -7e5);
                corrupted.rows[i].ratio = Some(42.0);
            }
            let a = fit_fold(kind, &m, &cfg, fold, SelectionMode::Global).map_err(|e| e.to_string())?;
            let b = fit_fold(kind, &corrupted, &cfg, fold, SelectionMode::Global).map_err(|e| e.to_string())?;
            if a.to_json() != b.to_json() {
                return Err(format!("{kind} fold {} leaked test rows", fold.index));
            }
            fits += 1;
        }
    }
    Ok(format!("LOOCV no-leakage over {fits} fits"))
}

fn metrics_arithmetic() -> Check {
    let s = metrics(&Confusion::from_matrix([[3, 2], [1, 4]])).map_err(|e| e.to_string())?;
    let f1 = 0.5 * (6.0 / 9.0 + 8.0 / 11.0);
    if (s.accuracy - 0.7).abs() < 1e-12 && (s.weighted_f1 - f1).abs() < 1e-12 {
        Ok(format!("[[3,2],[1,4]] accuracy {:.1}, weighted F1 {:.5}", s.accuracy, s.weighted_f1))
    } else {
        Err(format!("accuracy {} weighted F1 {}", s.accuracy, s.weighted_f1))
    }
}

fn criterion_5() -> Check {
    let checks: [fn() -> Check; 7] = [
        gradient_check,
        naive_bayes_closed_form,
        d_score_properties,
        summary_properties,
        selection_properties,
        no_leakage,
        metrics_arithmetic,
    ];
    let mut passed = Vec::new();
    let mut failed = Vec::new();
    for check in checks {
        match check() {
            Ok(m) => passed.push(m),
            Err(m) => failed.push(m),
        }
    }
    if failed.is_empty() {
        Ok(passed.join("; "))
    } else {
        Err(failed.join("; "))
    }
}

fn criterion_6(dir: &Path) -> Check {
    let p = |name: &str| dir.join(name).to_str().unwrap().to_string();
    let read = |name: &str| std::fs::read(dir.join(name)).map_err(|e| e.to_string());
    for (name, extra) in [("a.jsonl", None), ("b.jsonl", None), ("c.jsonl", Some("--sequential"))] {
        let mut args = vec!["simulate", "--pairs", "30", "--seed", "3", "--extra-firsts", "4"];
        let out = p(name);
        args.extend(["--out", out.as_str()]);
        args.extend(extra);
        ok(iat(&args))?;
    }
    let archive = read("a.jsonl")?;
    if archive != read("b.jsonl")? || archive != read("c.jsonl")? {
        return Err("cohort archives differ".into());
    }
    for run in ["m1.json", "m2.json"] {
        ok(iat(&["train", &p("a.jsonl"), "--detector", "mlp", "--seed", "3", "--out", &p(run)]))?;
    }
    if read("m1.json")? != read("m2.json")? {
        return Err("model files differ".into());
    }
    for run in ["r1.json", "r2.json"] {
        ok(iat(&["eval", &p("a.jsonl"), "--detector", "mlp,ratio", "--scheme", "kfold:10", "--seed", "3", "--out", &p(run)]))?;
    }
    if read("r1.json")? != read("r2.json")? {
        return Err("eval reports differ".into());
    }
    Ok(format!("archive ({} bytes), model and report byte-identical across runs", archive.len()))
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let mut lines: Vec<(u8, &str, Check)> = Vec::new();
    lines.push((1, "calibration reproduction", criterion_1()));
    lines.push((2, "reversal rate", criterion_2()));
    match detection_runs(dir.path(), &[1, 2, 3, 4, 5]) {
        Ok((f1, elapsed)) => {
            lines.push((3, "detection experiment", criterion_3(&f1, elapsed)));
            lines.push((4, "baseline gap", criterion_4(&f1)));
        }
        Err(e) => {
            lines.push((3, "detection experiment", Err(e.clone())));
            lines.push((4, "baseline gap", Err(e)));
        }
    }
    lines.push((5, "numerical property suite", criterion_5()));
    lines.push((6, "determinism", criterion_6(dir.path())));

    let mut failures = 0;
    for (n, title, result) in &lines {
        match result {
            Ok(detail) => println!("criterion {n} PASS {title}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("criterion {n} FAIL {title}: {detail}");
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", lines.len() - failures, lines.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
