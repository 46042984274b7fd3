use std::fs;
use std::io::{self, Read, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use iat_core::detectors::{fit, predict_proba, label_for, DetectorKind, DetectorModel, TrainConfig};
use iat_core::eval::cohort::cohort_stats_with;
use iat_core::eval::{cross_validate_with, render_f1_table, CvOptions, EvalReport, Scheme, SelectionMode};
use iat_core::features::{
    assemble_datasets_with, featurize, read_csv, select_features, write_csv, Datasets, FeatureMatrix, Label, Variant,
    DEFAULT_CORRELATION_THRESHOLD,
};
use iat_core::scoring::d_score;
use iat_core::session::{group_sessions, validate_session, write_archive, Cohort, Session};
use iat_core::simulator::{simulate_cohort_with, simulate_extra_firsts, Calibration, ModeMix};
use iat_core::Execution;
use serde::Serialize;

use crate::server::{self, AppState};
use crate::store::Store;

#[derive(Parser, Debug)]
#[command(name = "iat", version, about = "Simulate, score and classify Implicit Association Test attempts")]
pub struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Run the data-parallel stages on a single thread.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic cohort as a JSON-Lines session archive.
    Simulate(SimulateArgs),
    /// D-score each session; one JSON object per line.
    Score(InputArgs),
    /// Write the per-attempt feature matrix as CSV.
    Features(FeaturesArgs),
    /// Correlation-based feature selection over a feature CSV.
    Select(SelectArgs),
    /// Fit one detector on a cohort and write the model file.
    Train(TrainArgs),
    /// Cross-validate detectors on a cohort.
    Eval(EvalArgs),
    /// Cross-validate the latency-ratio baseline on a cohort.
    Baseline(BaselineArgs),
    /// Per-attempt means with paired t-tests.
    Stats(StatsArgs),
    /// Run the session-ingestion HTTP service.
    Serve(ServeArgs),
    /// Score, featurize and classify new sessions with a fitted model.
    Detect(DetectArgs),
}

#[derive(Args, Debug)]
pub struct InputArgs {
    /// Session files (JSON or JSON-Lines); standard input when absent or "-".
    pub inputs: Vec<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 67)]
    pub pairs: usize,
    /// First attempts of participants with no second attempt.
    #[arg(long, default_value_t = 0)]
    pub extra_firsts: usize,
    /// Archive path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Manifest path; defaults to `<out>.manifest.json` when --out is given.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Calibration JSON overriding the defaults field by field.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Compliance-mode probabilities: correct,none,practice_misapplied,wrong_critical.
    #[arg(long, value_parser = parse_mix)]
    pub mix: Option<ModeMix>,
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = VariantArg::Unpruned)]
    pub variant: VariantArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    /// Feature CSV written by `features`; standard input when absent.
    pub features: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CORRELATION_THRESHOLD)]
    pub threshold: f64,
    /// Where to write the JSON array of kept feature names.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = VariantArg::Unpruned)]
    pub variant: VariantArg,
    #[arg(long, default_value_t = DEFAULT_CORRELATION_THRESHOLD)]
    pub threshold: f64,
    /// Use this feature mask (JSON array of names) instead of selecting.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Training configuration JSON; missing fields keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// MLP epochs (overrides the configuration file).
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_parser = parse_detector)]
    pub detector: DetectorKind,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CvArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// unpruned, pruned or both.
    #[arg(long, value_enum, default_value_t = VariantsArg::Both)]
    pub variant: VariantsArg,
    /// loocv, kfold or kfold:K.
    #[arg(long, default_value = "loocv", value_parser = parse_scheme)]
    pub scheme: Scheme,
    #[arg(long, default_value_t = DEFAULT_CORRELATION_THRESHOLD)]
    pub threshold: f64,
    /// Recompute the feature mask on each fold's training rows.
    #[arg(long)]
    pub per_fold_selection: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Comma-separated naive_bayes, logistic, mlp, ratio, or all.
    #[arg(long, default_value = "all", value_parser = parse_detectors)]
    pub detector: Detectors,
    #[command(flatten)]
    pub cv: CvArgs,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub cv: CvArgs,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// JSON-Lines store file.
    #[arg(long, env = "IAT_STORE", default_value = "iat_store.jsonl")]
    pub store: PathBuf,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariantArg {
    Unpruned,
    Pruned,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Unpruned => Variant::Unpruned,
            VariantArg::Pruned => Variant::Pruned,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariantsArg {
    Unpruned,
    Pruned,
    Both,
}

impl VariantsArg {
    fn variants(self) -> Vec<Variant> {
        match self {
            VariantsArg::Unpruned => vec![Variant::Unpruned],
            VariantsArg::Pruned => vec![Variant::Pruned],
            VariantsArg::Both => vec![Variant::Unpruned, Variant::Pruned],
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Table,
}

fn parse_detector(s: &str) -> Result<DetectorKind, String> {
    s.parse().map_err(|e: iat_core::Error| e.to_string())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Detectors(pub Vec<DetectorKind>);

fn parse_detectors(s: &str) -> Result<Detectors, String> {
    if s == "all" {
        return Ok(Detectors(DetectorKind::ALL.to_vec()));
    }
    s.split(',').map(|d| parse_detector(d.trim())).collect::<Result<_, _>>().map(Detectors)
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: iat_core::Error| e.to_string())
}

fn parse_mix(s: &str) -> Result<ModeMix, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [correct, none, practice_misapplied, wrong_critical] = parts[..] else {
        return Err("expected four comma-separated probabilities".into());
    };
    let mix = ModeMix {
        correct,
        none,
        practice_misapplied,
        wrong_critical,
    };
    mix.validate().map_err(|e| e.to_string())?;
    Ok(mix)
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let ctx = Ctx { seed: cli.seed, exec };
    match cli.command {
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Score(a) => score(a),
        Command::Features(a) => features(&ctx, a),
        Command::Select(a) => select(a),
        Command::Train(a) => train(&ctx, a),
        Command::Eval(a) => evaluate(&ctx, &a.detector.0, a.cv),
        Command::Baseline(a) => evaluate(&ctx, &[DetectorKind::Ratio], a.cv),
        Command::Stats(a) => stats(&ctx, a),
        Command::Serve(a) => serve(&ctx, a),
        Command::Detect(a) => detect(&ctx, a),
    }
}

struct Ctx {
    seed: u64,
    exec: Execution,
}

/// Reads every session from the inputs, accepting single JSON documents,
/// concatenated documents and JSON-Lines alike.
pub fn read_sessions(inputs: &[PathBuf]) -> Result<Vec<Session>> {
    let stdin_only = [PathBuf::from("-")];
    let inputs = if inputs.is_empty() { &stdin_only[..] } else { inputs };
    let mut sessions = Vec::new();
    for path in inputs {
        let (name, bytes) = if path.as_os_str() == "-" {
            let mut buf = Vec::new();
            io::stdin().read_to_end(&mut buf).context("reading standard input")?;
            ("<stdin>".to_string(), buf)
        } else {
            let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
            (path.display().to_string(), bytes)
        };
        let stream = serde_json::Deserializer::from_slice(&bytes).into_iter::<Session>();
        for (n, item) in stream.enumerate() {
            let s = item.with_context(|| format!("{name}: session {} is malformed", n + 1))?;
            let violations = validate_session(&s);
            if !violations.is_empty() {
                bail!("{name}: session {} ({}) is invalid: {}", n + 1, s.session_id, violations.join("; "));
            }
            sessions.push(s);
        }
    }
    Ok(sessions)
}

fn load_cohort(inputs: &[PathBuf]) -> Result<(Cohort, Vec<Session>)> {
    let sessions = read_sessions(inputs)?;
    Ok(group_sessions(sessions)?)
}

fn load_datasets(inputs: &[PathBuf], exec: Execution) -> Result<Datasets> {
    let (cohort, unpaired) = load_cohort(inputs)?;
    let ds = assemble_datasets_with(&cohort, &unpaired, exec)?;
    log::info!(
        "{} pairs, {} unpaired first attempts, {} reversals; unpruned n={}, pruned n={}",
        cohort.len(),
        unpaired.len(),
        ds.reversals,
        ds.unpruned.len(),
        ds.pruned.len()
    );
    Ok(ds)
}

fn variant_of(ds: &Datasets, v: Variant) -> &FeatureMatrix {
    match v {
        Variant::Unpruned => &ds.unpruned,
        Variant::Pruned => &ds.pruned,
    }
}

fn train_config(seed: u64, config: Option<&Path>, epochs: Option<usize>) -> Result<TrainConfig> {
    let mut cfg = match config {
        Some(p) => serde_json::from_str(&fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?)
            .with_context(|| format!("{} is not a training configuration", p.display()))?,
        None => TrainConfig::default(),
    };
    cfg.seed = seed;
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes to the file, or to standard output when `path` is `None`.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    pairs: usize,
    extra_firsts: usize,
    sessions: usize,
    calibration: &'a Calibration,
    mode_mix: &'a ModeMix,
}

fn simulate(ctx: &Ctx, a: SimulateArgs) -> Result<()> {
    let cal: Calibration = match &a.calibration {
        Some(p) => serde_json::from_str(&fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?)
            .with_context(|| format!("{} is not a calibration file", p.display()))?,
        None => Calibration::default(),
    };
    let mix = a.mix.unwrap_or_default();
    let cohort = simulate_cohort_with(a.pairs, &mix, &cal, ctx.seed, ctx.exec)?;
    let extras = simulate_extra_firsts(a.extra_firsts, &cal, ctx.seed, ctx.exec)?;
    let mut archive = Vec::new();
    write_archive(&mut archive, cohort.sessions().chain(&extras))?;
    emit(a.out.as_deref(), &archive)?;

    let manifest_path = a
        .manifest
        .or_else(|| a.out.as_ref().map(|o| PathBuf::from(format!("{}.manifest.json", o.display()))));
    if let Some(path) = manifest_path {
        let manifest = Manifest {
            seed: ctx.seed,
            pairs: a.pairs,
            extra_firsts: a.extra_firsts,
            sessions: 2 * cohort.len() + extras.len(),
            calibration: &cal,
            mode_mix: &mix,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn score(a: InputArgs) -> Result<()> {
    let sessions = read_sessions(&a.inputs)?;
    let mut out = Vec::new();
    let mut failed = 0;
    for s in &sessions {
        match d_score(s) {
            Ok(r) => {
                serde_json::to_writer(&mut out, &r)?;
                out.push(b'\n');
            }
            Err(e) => {
                eprintln!("{e}");
                failed += 1;
            }
        }
    }
    emit(None, &out)?;
    if failed > 0 {
        bail!("{failed} of {} sessions could not be scored", sessions.len());
    }
    Ok(())
}

fn features(ctx: &Ctx, a: FeaturesArgs) -> Result<()> {
    let ds = load_datasets(&a.input.inputs, ctx.exec)?;
    let mut buf = Vec::new();
    write_csv(&mut buf, variant_of(&ds, a.variant.into()))?;
    emit(a.out.as_deref(), &buf)
}

fn select(a: SelectArgs) -> Result<()> {
    let m = match &a.features {
        Some(p) if p.as_os_str() != "-" => {
            read_csv(fs::File::open(p).with_context(|| format!("cannot read {}", p.display()))?, Variant::Unpruned)?
        }
        _ => read_csv(io::stdin().lock(), Variant::Unpruned)?,
    };
    let selected = select_features(&m, a.threshold)?;
    let mut text = serde_json::to_string_pretty(&selected.selected_names())?;
    text.push('\n');
    emit(a.out.as_deref(), text.as_bytes())
}

/// The chosen variant with its feature mask applied.
fn masked(ds: &Datasets, variant: Variant, threshold: f64, mask: Option<&Path>) -> Result<FeatureMatrix> {
    let m = variant_of(ds, variant);
    match mask {
        Some(p) => {
            let names: Vec<String> = serde_json::from_str(&fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?)
                .with_context(|| format!("{} is not a JSON array of feature names", p.display()))?;
            Ok(m.clone().with_selected_names(&names)?)
        }
        None => Ok(select_features(m, threshold)?),
    }
}

fn train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let ds = load_datasets(&a.input.inputs, ctx.exec)?;
    let m = masked(&ds, a.model.variant.into(), a.model.threshold, a.model.mask.as_deref())?;
    let cfg = train_config(ctx.seed, a.model.config.as_deref(), a.model.epochs)?;
    let model = fit(a.detector, &m, &cfg)?;
    let mut text = model.to_json();
    text.push('\n');
    emit(a.out.as_deref(), text.as_bytes())
}

fn evaluate(ctx: &Ctx, kinds: &[DetectorKind], a: CvArgs) -> Result<()> {
    let ds = load_datasets(&a.input.inputs, ctx.exec)?;
    let cfg = train_config(ctx.seed, a.config.as_deref(), a.epochs)?;
    let selection = if a.per_fold_selection {
        SelectionMode::PerFold { threshold: a.threshold }
    } else {
        SelectionMode::Global
    };
    let opts = CvOptions {
        scheme: a.scheme,
        selection,
        exec: ctx.exec,
    };
    let mut reports: Vec<EvalReport> = Vec::new();
    for variant in a.variant.variants() {
        let base = variant_of(&ds, variant);
        let m = match selection {
            SelectionMode::Global => select_features(base, a.threshold)?,
            SelectionMode::PerFold { .. } => base.clone(),
        };
        for &kind in kinds {
            let report = cross_validate_with(kind, &m, &cfg, &opts).with_context(|| format!("{kind} on {variant} data"))?;
            log::info!("{kind} {variant}: weighted F1 {:.3}", report.weighted_f1);
            reports.push(report);
        }
    }
    let json_text = if reports.len() == 1 {
        serde_json::to_string_pretty(&reports[0])?
    } else {
        serde_json::to_string_pretty(&reports)?
    } + "\n";
    if let Some(p) = &a.out {
        fs::write(p, &json_text).with_context(|| format!("cannot write {}", p.display()))?;
    }
    match a.format {
        Format::Json => emit(None, json_text.as_bytes()),
        Format::Table => emit(None, render_f1_table(&reports).as_bytes()),
    }
}

fn stats(ctx: &Ctx, a: StatsArgs) -> Result<()> {
    let (cohort, unpaired) = load_cohort(&a.input.inputs)?;
    if !unpaired.is_empty() {
        log::info!("ignoring {} unpaired first attempts", unpaired.len());
    }
    let stats = cohort_stats_with(&cohort, ctx.exec)?;
    match a.format {
        Format::Table => emit(None, stats.render_table().as_bytes()),
        Format::Json => emit(None, (serde_json::to_string_pretty(&stats)? + "\n").as_bytes()),
    }
}

fn serve(ctx: &Ctx, a: ServeArgs) -> Result<()> {
    let store = Store::open(&a.store)?;
    let state = Arc::new(AppState::new(store, ctx.seed));
    let addr = SocketAddr::new(a.host, a.port);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(server::serve(addr, state))
}

#[derive(Serialize)]
struct Detection {
    session_id: String,
    /// Probability of a second attempt.
    proba: f64,
    predicted: Label,
    d_score: Option<f64>,
}

fn detect(ctx: &Ctx, a: DetectArgs) -> Result<()> {
    let text = fs::read_to_string(&a.model).with_context(|| format!("cannot read {}", a.model.display()))?;
    let model = DetectorModel::from_json(&text)?;
    let sessions = read_sessions(&a.input.inputs)?;
    let rows = ctx.exec.map_slice(&sessions, |s| -> Result<Detection> {
        let proba = predict_proba(&model, &featurize(s)?)?;
        Ok(Detection {
            session_id: s.session_id.clone(),
            proba,
            predicted: label_for(proba, model.config.threshold),
            d_score: d_score(s).ok().map(|r| r.d_score),
        })
    });
    let mut out = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut out, &row?)?;
        out.push(b'\n');
    }
    emit(None, &out)
}
