use iat_core::detectors::logistic::{self, LogisticParams};
use iat_core::detectors::mlp::Network;
use iat_core::detectors::{
    fit, mlp_gradients, predict, predict_proba, DetectorKind, DetectorModel, Parameters, TrainConfig,
};
use iat_core::features::{FeatureMatrix, FeatureVector, Label, Variant};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn matrix(xs: &[Vec<f64>], labels: &[Label]) -> FeatureMatrix {
    let p = xs[0].len();
    FeatureMatrix {
        rows: xs
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (x, &label))| FeatureVector {
                session_id: format!("r{i:04}"),
                label,
                values: x.clone(),
                ratio: None,
            })
            .collect(),
        feature_names: (0..p).map(|j| format!("x{j}")).collect(),
        selected: vec![true; p],
        variant: Variant::Unpruned,
    }
}

fn label(b: bool) -> Label {
    if b {
        Label::Second
    } else {
        Label::First
    }
}

fn accuracy(model: &DetectorModel, m: &FeatureMatrix) -> f64 {
    let hits = m
        .rows
        .iter()
        .filter(|r| predict(model, r).unwrap() == r.label)
        .count();
    hits as f64 / m.len() as f64
}

fn xor() -> FeatureMatrix {
    let points = [([0.0, 0.0], false), ([0.0, 1.0], true), ([1.0, 0.0], true), ([1.0, 1.0], false)];
    let mut xs = Vec::new();
    let mut ls = Vec::new();
    for _ in 0..50 {
        for (x, y) in points {
            xs.push(x.to_vec());
            ls.push(label(y));
        }
    }
    matrix(&xs, &ls)
}

#[test]
fn logistic_separates_a_line() {
    let mut xs = Vec::new();
    let mut ls = Vec::new();
    for _ in 0..20 {
        xs.push(vec![-1.0]);
        ls.push(Label::First);
        xs.push(vec![1.0]);
        ls.push(Label::Second);
    }
    let m = matrix(&xs, &ls);
    let model = fit(DetectorKind::Logistic, &m, &TrainConfig::default()).unwrap();
    assert_eq!(accuracy(&model, &m), 1.0);
}

#[test]
fn xor_needs_the_hidden_layer() {
    let m = xor();
    let logistic = fit(DetectorKind::Logistic, &m, &TrainConfig::default()).unwrap();
    assert!(accuracy(&logistic, &m) <= 0.75);

    let cfg = TrainConfig {
        learning_rate: 0.01,
        epochs: 300,
        seed: 7,
        ..TrainConfig::default()
    };
    let mlp = fit(DetectorKind::Mlp, &m, &cfg).unwrap();
    assert_eq!(accuracy(&mlp, &m), 1.0);
    for r in &m.rows[..4] {
        let p = predict_proba(&mlp, r).unwrap();
        assert_eq!(p >= 0.5, r.label == Label::Second, "proba {p} for {:?}", r.values);
    }
}

#[test]
fn logistic_loss_decreases() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let xs: Vec<Vec<f64>> = (0..80).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| f64::from(x[0] - 0.5 * x[1] + rng.random_range(-1.0..1.0) > 0.0))
        .collect();
    let cfg = TrainConfig {
        gd_learning_rate: 0.05,
        gd_max_iter: 2000,
        ..TrainConfig::default()
    };
    let fit = logistic::fit(&xs, &ys, &cfg);
    assert!(fit.losses.len() > 10);
    for w in fit.losses.windows(2) {
        assert!(w[1] <= w[0] + 1e-15, "{} -> {}", w[0], w[1]);
    }
    assert_eq!(LogisticParams::zeros(2).proba(&[3.0, -9.0]), 0.5);
}

#[test]
fn naive_bayes_hand_moments() {
    // first: (1, 2), (3, 2); second: (4, 0), (6, 1), (8, 2)
    let xs = vec![vec![1.0, 2.0], vec![4.0, 0.0], vec![3.0, 2.0], vec![6.0, 1.0], vec![8.0, 2.0]];
    let ls = [Label::First, Label::Second, Label::First, Label::Second, Label::Second];
    let cfg = TrainConfig {
        normalize: false,
        ..TrainConfig::default()
    };
    let model = fit(DetectorKind::NaiveBayes, &matrix(&xs, &ls), &cfg).unwrap();
    let Parameters::NaiveBayes(p) = &model.parameters else {
        panic!("wrong parameters");
    };
    assert_eq!(p.priors, [0.4, 0.6]);
    assert_eq!(p.means[0], vec![2.0, 2.0]);
    assert_eq!(p.means[1], vec![6.0, 1.0]);
    assert_eq!(p.variances[0], vec![1.0, 1e-9]);
    assert_eq!(p.variances[1], vec![8.0 / 3.0, 2.0 / 3.0]);
}

fn random_problem(seed: u64, n: usize, p: usize) -> (Vec<Vec<f64>>, Vec<Label>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ls: Vec<Label> = (0..n).map(|i| label(i % 2 == 1)).collect();
    let xs = ls
        .iter()
        .map(|l| {
            let shift = if *l == Label::Second { 0.8 } else { 0.0 };
            (0..p).map(|j| rng.random_range(-1.0..1.0) + shift * (j % 2) as f64).collect()
        })
        .collect();
    (xs, ls)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn naive_bayes_is_affine_invariant(seed in 0u64..10_000, a in 0.01..100.0f64, b in -1e3..1e3f64, col in 0usize..3) {
        let (xs, ls) = random_problem(seed, 40, 3);
        let (test, _) = random_problem(seed + 1, 20, 3);
        let rescale = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter().map(|r| {
                let mut r = r.clone();
                r[col] = a * r[col] + b;
                r
            }).collect()
        };
        for normalize in [true, false] {
            let cfg = TrainConfig { normalize, ..TrainConfig::default() };
            let m1 = fit(DetectorKind::NaiveBayes, &matrix(&xs, &ls), &cfg).unwrap();
            let m2 = fit(DetectorKind::NaiveBayes, &matrix(&rescale(&xs), &ls), &cfg).unwrap();
            let t1 = matrix(&test, &vec![Label::First; 20]);
            let t2 = matrix(&rescale(&test), &vec![Label::First; 20]);
            for (r1, r2) in t1.rows.iter().zip(&t2.rows) {
                prop_assert_eq!(predict(&m1, r1).unwrap(), predict(&m2, r2).unwrap());
            }
        }
    }

    #[test]
    fn probabilities_stay_in_unit_interval(seed in 0u64..10_000, scale in 1.0..1e6f64) {
        let (xs, ls) = random_problem(seed, 30, 4);
        let m = matrix(&xs, &ls);
        let cfg = TrainConfig { epochs: 5, gd_max_iter: 50, ..TrainConfig::default() };
        let probe: Vec<f64> = xs[0].iter().map(|v| v * scale).collect();
        let row = FeatureVector { session_id: "x".into(), label: Label::First, values: probe, ratio: None };
        for kind in [DetectorKind::NaiveBayes, DetectorKind::Logistic, DetectorKind::Mlp] {
            let model = fit(kind, &m, &cfg).unwrap();
            let p = predict_proba(&model, &row).unwrap();
            prop_assert!((0.0..=1.0).contains(&p), "{kind}: {p}");
        }
    }
}

#[test]
fn mlp_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (xs, ls) = random_problem(3, 5, 4);
    let batch = matrix(&xs, &ls);
    let cfg = TrainConfig {
        normalize: false,
        epochs: 1,
        ..TrainConfig::default()
    };
    let mut model = fit(DetectorKind::Mlp, &batch, &cfg).unwrap();
    // a random network rather than the briefly trained one
    model.parameters = Parameters::Mlp(Network::init(4, 13, &mut rng));
    let analytic = mlp_gradients(&model, &batch.rows).unwrap().flatten();

    let Parameters::Mlp(net) = &model.parameters else { unreachable!() };
    let ys: Vec<f64> = ls.iter().map(|l| l.target()).collect();
    let h = 1e-5;
    let mut checked = 0;
    for k in 0..analytic.len() {
        let perturbed = |delta: f64| {
            let mut n = net.clone();
            let mut flat_index = k;
            let hidden = n.b1.len();
            let inputs = n.w1[0].len();
            if flat_index < hidden * inputs {
                n.w1[flat_index / inputs][flat_index % inputs] += delta;
            } else {
                flat_index -= hidden * inputs;
                if flat_index < hidden {
                    n.b1[flat_index] += delta;
                } else if flat_index < 2 * hidden {
                    n.w2[flat_index - hidden] += delta;
                } else {
                    n.b2 += delta;
                }
            }
            n.loss(&xs, &ys)
        };
        let numeric = (perturbed(h) - perturbed(-h)) / (2.0 * h);
        let a = analytic[k];
        let scale = a.abs().max(numeric.abs());
        if scale < 1e-7 {
            // both effectively zero (dead ReLU unit)
            assert!((a - numeric).abs() < 1e-9, "entry {k}: {a} vs {numeric}");
            continue;
        }
        assert!((a - numeric).abs() / scale <= 1e-4, "entry {k}: {a} vs {numeric}");
        checked += 1;
    }
    assert!(checked > analytic.len() / 2, "only {checked} entries were non-trivial");
}

#[test]
fn zero_network_balanced_batch() {
    let (xs, ls) = random_problem(5, 4, 3);
    let m = matrix(&xs, &ls);
    let mut model = fit(DetectorKind::Mlp, &m, &TrainConfig { epochs: 1, ..TrainConfig::default() }).unwrap();
    model.parameters = Parameters::Mlp(Network::zeros(3, 13));
    let g = mlp_gradients(&model, &m.rows).unwrap();
    assert_eq!(g.b2, 0.0);
    let doubled: Vec<FeatureVector> = m.rows.iter().chain(&m.rows).cloned().collect();
    assert_eq!(mlp_gradients(&model, &doubled).unwrap(), g);
}

#[test]
fn fits_are_deterministic() {
    let (xs, ls) = random_problem(9, 40, 5);
    let m = matrix(&xs, &ls);
    for kind in [DetectorKind::NaiveBayes, DetectorKind::Logistic, DetectorKind::Mlp] {
        let cfg = TrainConfig { seed: 3, ..TrainConfig::default() };
        let a = fit(kind, &m, &cfg).unwrap();
        let b = fit(kind, &m, &cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json(), "{kind}");
        let back = DetectorModel::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }
    let a = fit(DetectorKind::Mlp, &m, &TrainConfig { seed: 3, ..TrainConfig::default() }).unwrap();
    let b = fit(DetectorKind::Mlp, &m, &TrainConfig { seed: 4, ..TrainConfig::default() }).unwrap();
    assert_ne!(a.parameters, b.parameters);
}

#[test]
fn errors_are_reported() {
    let m = matrix(&[vec![1.0], vec![2.0], vec![3.0]], &[Label::First; 3]);
    assert!(fit(DetectorKind::Logistic, &m, &TrainConfig::default()).is_err());

    let m = matrix(&[vec![1.0, f64::NAN], vec![2.0, 0.0]], &[Label::First, Label::Second]);
    let err = fit(DetectorKind::NaiveBayes, &m, &TrainConfig::default()).unwrap_err();
    assert!(err.to_string().contains("x1"), "{err}");

    let m = matrix(&[vec![1.0, 0.0], vec![2.0, 1.0]], &[Label::First, Label::Second]);
    let model = fit(DetectorKind::Logistic, &m, &TrainConfig::default()).unwrap();
    let short = FeatureVector { session_id: "s".into(), label: Label::First, values: vec![1.0], ratio: None };
    assert!(predict_proba(&model, &short).is_err());
}
