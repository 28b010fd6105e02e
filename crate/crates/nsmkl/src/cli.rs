//! The `nsmkl` command-line surface: cluster, train, score, eval, tune,
//! diagnose, synth, and rerun.
//!
//! Every successful run writes a manifest (`<output>.manifest.json` or
//! `<out-dir>/<command>.manifest.json`) holding the resolved argv, a config
//! snapshot, SHA-256 hashes of the inputs, the output paths, and the seed —
//! enough to reproduce the run bit-for-bit with `nsmkl rerun`. All randomness
//! flows from the single `--seed` flag. `NSMKL_THREADS` caps internal
//! parallelism; results do not depend on it.
//!
//! Failures print machine-readable JSON to stderr and exit 1; usage errors
//! exit 2.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering;
use crate::dataio::{
    load_dataset, load_gram_csv, load_labels, load_model, read_scores_csv, save_model,
    write_labels_csv, write_scores_csv, write_view_csv, FeatureDataset, Label, MklConfig, Regime,
};
use crate::kernels::{average_gram, gram, rbf_width, GramMatrix, KernelKind, KernelSpec};
use crate::metrics::{
    acer, auc, eer_threshold, grid_search, hter, AcerReport, EvalSet, GridCell, GridSpec,
    HterReport, Orientation, SelectionMetric,
};
use crate::model::{fit_precomputed, fit_with_specs, ScoreMode, TrainedModel};
use crate::theory::{
    generalisation_bound, lambda_norm_check, regime_bounds, BoundInput, BoundReport,
    GeneralisationBound, LambdaNormDiagnostic,
};
use crate::synth::{locality_dataset, LocalitySpec};
use crate::{Error, Result};

/// Reproducibility record emitted by every run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub config: Option<serde_json::Value>,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub duration_ms: u128,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

struct RunArtifacts {
    command: &'static str,
    config: Option<serde_json::Value>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    seed: Option<u64>,
    manifest_path: PathBuf,
}

#[derive(Parser)]
#[command(
    name = "nsmkl",
    version,
    about = "Localised multiple-kernel one-class classification on the Fisher null space"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit kernel k-means and emit assignment + membership CSVs.
    Cluster(ClusterArgs),
    /// Train a model and emit a model archive plus a JSON trace.
    Train(TrainArgs),
    /// Score query samples with a trained model.
    Score(ScoreArgs),
    /// Evaluate a scores CSV against labels (AUC, HTER, ACER).
    Eval(EvalArgs),
    /// Exhaustive (δ, p, q) grid search on a dev set.
    Tune(TuneArgs),
    /// Complexity-bound diagnostics for a trained model.
    Diagnose(DiagnoseArgs),
    /// Generate the synthetic locality benchmark as CSV files.
    Synth(SynthArgs),
    /// Re-execute a previous run from its manifest.
    Rerun(RerunArgs),
}

#[derive(Args)]
struct KernelInput {
    /// Feature view CSVs (sample_id + numeric columns), one per view.
    #[arg(long, num_args = 1.., value_name = "FILE")]
    views: Vec<PathBuf>,
    /// Precomputed n×n Gram CSVs (header-less), one per view.
    #[arg(long, num_args = 1.., value_name = "FILE", conflicts_with = "views")]
    precomputed_grams: Vec<PathBuf>,
    /// Kernel for feature views.
    #[arg(long, default_value = "rbf", value_parser = parse_kernel)]
    kernel: KernelKind,
}

fn parse_kernel(s: &str) -> std::result::Result<KernelKind, String> {
    match s {
        "rbf" => Ok(KernelKind::Rbf),
        "linear" => Ok(KernelKind::Linear),
        other => Err(format!("unknown kernel {other:?}; expected rbf or linear")),
    }
}

#[derive(Args)]
struct ConfigFlags {
    /// JSON config file; explicit flags override its fields.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    /// Tikhonov regulariser δ.
    #[arg(long, conflicts_with = "theta")]
    delta: Option<f64>,
    /// Primal trade-off θ; sets δ = n/θ.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long, value_name = "REGIME")]
    regime: Option<Regime>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Softmax temperature override for cluster memberships.
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    kmeans_restarts: Option<usize>,
}

impl ConfigFlags {
    /// defaults ← config file ← explicit flags; δ must come from somewhere.
    fn resolve(&self, n: usize) -> Result<MklConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let raw = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.display().to_string(),
                    source: e,
                })?;
                serde_json::from_str::<MklConfig>(&raw).map_err(|e| Error::Archive {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?
            }
            None => {
                let delta = match (self.delta, self.theta) {
                    (Some(d), _) => d,
                    (None, Some(t)) => n as f64 / t,
                    (None, None) => {
                        return Err(Error::InvalidParam(
                            "provide --delta, --theta, or a config file".into(),
                        ))
                    }
                };
                MklConfig::new(self.p.unwrap_or(2.0), self.q.unwrap_or(2.0), delta)
            }
        };
        if let Some(p) = self.p {
            cfg.p = p;
        }
        if let Some(q) = self.q {
            cfg.q = q;
        }
        if let Some(d) = self.delta {
            cfg.delta = d;
        } else if let Some(t) = self.theta {
            cfg.delta = n as f64 / t;
        }
        if let Some(c) = self.clusters {
            cfg.clusters = c;
        }
        if let Some(r) = self.regime {
            cfg.regime = r;
        }
        if let Some(t) = self.tol {
            cfg.tol = t;
        }
        if let Some(m) = self.max_iter {
            cfg.max_iter = m;
        }
        if let Some(s) = self.seed {
            cfg.rng_seed = s;
        }
        if let Some(t) = self.temperature {
            cfg.temperature = Some(t);
        }
        if let Some(r) = self.kmeans_restarts {
            cfg.kmeans_restarts = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: KernelInput,
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    input: KernelInput,
    #[command(flatten)]
    flags: ConfigFlags,
    /// Output model archive path.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// JSON trace path (default: <model>.trace.json).
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Fail (exit 1) instead of warning when training does not converge.
    #[arg(long)]
    strict_convergence: bool,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Query feature view CSVs, one per training view.
    #[arg(long, num_args = 1.., value_name = "FILE")]
    views: Vec<PathBuf>,
    /// Precomputed m×n query-vs-train Gram CSVs (for precomputed models).
    #[arg(long, num_args = 1.., value_name = "FILE", conflicts_with = "views")]
    query_grams: Vec<PathBuf>,
    /// Header-less m×G CSV of self-kernel values κ_g(y,y) per query.
    #[arg(long, value_name = "FILE", requires = "query_grams")]
    query_diags: Option<PathBuf>,
    #[arg(long, default_value = "raw")]
    score_mode: ScoreMode,
    #[arg(long, value_name = "FILE")]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    scores: PathBuf,
    #[arg(long, value_name = "FILE")]
    labels: PathBuf,
    /// Dev scores for fixing the HTER threshold at the dev EER.
    #[arg(long, value_name = "FILE", requires = "dev_labels")]
    dev_scores: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    dev_labels: Option<PathBuf>,
    /// Explicit decision threshold for ACER (otherwise the dev EER threshold).
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value = "higher")]
    orientation: Orientation,
    #[arg(long, value_name = "FILE")]
    output: PathBuf,
    /// Also write the report as a flat metric,value CSV.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    input: KernelInput,
    /// Dev feature view CSVs (same view count as training).
    #[arg(long, num_args = 1.., value_name = "FILE")]
    dev_views: Vec<PathBuf>,
    #[arg(long, value_name = "FILE")]
    dev_labels: PathBuf,
    /// JSON grid file overriding the default search grid.
    #[arg(long, value_name = "FILE")]
    grid: Option<PathBuf>,
    #[arg(long, default_value = "auc")]
    metric: SelectionMetric,
    #[command(flatten)]
    flags: ConfigFlags,
    #[arg(long, value_name = "FILE")]
    output: PathBuf,
    /// Where to write the winning config alone, ready for `train --config`
    /// (default: <output>.best-config.json).
    #[arg(long, value_name = "FILE")]
    best_config: Option<PathBuf>,
    /// Also write the evaluated cells as CSV.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Loss bound B_l for the generalisation-bound assembly.
    #[arg(long, default_value_t = 1.0)]
    loss_bound: f64,
    /// Confidence level Δ.
    #[arg(long, default_value_t = 0.05)]
    confidence: f64,
    #[arg(long, value_name = "FILE")]
    output: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    #[arg(long, default_value_t = 4)]
    dims_per_view: usize,
    #[arg(long, default_value_t = 25)]
    train_per_cluster: usize,
    #[arg(long, default_value_t = 8)]
    test_targets_per_cluster: usize,
    #[arg(long, default_value_t = 24)]
    test_outliers: usize,
    #[arg(long, default_value_t = 4.0)]
    signal_scale: f64,
    #[arg(long, default_value_t = 0.25)]
    signal_noise: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_sigma: f64,
}

#[derive(Args)]
struct RerunArgs {
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
}

/// Entry point; returns the process exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { 2 } else { 0 };
        }
    };
    if let Command::Rerun(args) = &cli.command {
        return match load_manifest(&args.manifest) {
            Ok(manifest) => run(manifest.argv),
            Err(err) => {
                report_error(&err);
                1
            }
        };
    }
    let started = Instant::now();
    let outcome = dispatch(&cli.command);
    match outcome {
        Ok(artifacts) => match finalise(&artifacts, &argv, started) {
            Ok(manifest) => {
                let summary = serde_json::json!({
                    "command": manifest.command,
                    "outputs": manifest.outputs,
                    "manifest": artifacts.manifest_path.display().to_string(),
                });
                println!("{summary}");
                0
            }
            Err(err) => {
                report_error(&err);
                1
            }
        },
        Err(err) => {
            report_error(&err);
            1
        }
    }
}

fn dispatch(command: &Command) -> Result<RunArtifacts> {
    match command {
        Command::Cluster(args) => cmd_cluster(args),
        Command::Train(args) => cmd_train(args),
        Command::Score(args) => cmd_score(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Tune(args) => cmd_tune(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Rerun(_) => unreachable!("handled in run()"),
    }
}

fn report_error(err: &Error) {
    let doc = serde_json::json!({
        "error": { "kind": err.kind(), "message": err.to_string() }
    });
    eprintln!("{doc}");
}

fn report_warning(kind: &str, message: String) {
    let doc = serde_json::json!({ "warning": { "kind": kind, "message": message } });
    eprintln!("{doc}");
}

fn finalise(artifacts: &RunArtifacts, argv: &[String], started: Instant) -> Result<RunManifest> {
    let mut inputs = Vec::with_capacity(artifacts.inputs.len());
    for path in &artifacts.inputs {
        inputs.push(InputHash {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
    }
    let manifest = RunManifest {
        tool: "nsmkl".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: artifacts.command.into(),
        argv: argv.to_vec(),
        config: artifacts.config.clone(),
        inputs,
        outputs: artifacts
            .outputs
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
        seed: artifacts.seed,
        duration_ms: started.elapsed().as_millis(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Internal(e.to_string()))?;
    std::fs::write(&artifacts.manifest_path, json).map_err(|e| Error::Io {
        path: artifacts.manifest_path.display().to_string(),
        source: e,
    })?;
    Ok(manifest)
}

fn load_manifest(path: &Path) -> Result<RunManifest> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::from_str(&raw).map_err(|e| Error::Archive {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    std::fs::write(path, json).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })
}

/// Loaded training-side kernel input: either feature views with specs, or
/// precomputed Grams.
enum TrainingInput {
    Features(FeatureDataset, Vec<KernelSpec>),
    Precomputed(Vec<Array2<f64>>, Vec<String>),
}

impl TrainingInput {
    fn n(&self) -> usize {
        match self {
            TrainingInput::Features(ds, _) => ds.n(),
            TrainingInput::Precomputed(grams, _) => grams.first().map_or(0, |g| g.nrows()),
        }
    }
}

fn load_training_input(input: &KernelInput) -> Result<TrainingInput> {
    if !input.views.is_empty() {
        let dataset = load_dataset(&input.views, None)?;
        let specs = dataset
            .views
            .iter()
            .enumerate()
            .map(|(g, view)| match input.kernel {
                KernelKind::Rbf => Ok(KernelSpec::rbf(g, rbf_width(view)?)),
                KernelKind::Linear => Ok(KernelSpec::linear(g)),
                KernelKind::Precomputed => unreachable!("not a CLI kernel"),
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(TrainingInput::Features(dataset, specs));
    }
    if input.precomputed_grams.is_empty() {
        return Err(Error::InvalidParam(
            "provide --views or --precomputed-grams".into(),
        ));
    }
    let mut grams = Vec::with_capacity(input.precomputed_grams.len());
    for path in &input.precomputed_grams {
        grams.push(load_gram_csv(path)?);
    }
    let n = grams[0].nrows();
    let ids = (0..n).map(|i| format!("s{i:06}")).collect();
    Ok(TrainingInput::Precomputed(grams, ids))
}

fn input_paths(input: &KernelInput) -> Vec<PathBuf> {
    input
        .views
        .iter()
        .chain(input.precomputed_grams.iter())
        .cloned()
        .collect()
}

fn fit_from_input(input: TrainingInput, cfg: &MklConfig) -> Result<TrainedModel> {
    match input {
        TrainingInput::Features(dataset, specs) => fit_with_specs(&dataset, &specs, cfg),
        TrainingInput::Precomputed(grams, ids) => fit_precomputed(grams, ids, cfg),
    }
}

// ---------------------------------------------------------------------------
// cluster
// ---------------------------------------------------------------------------

fn cmd_cluster(args: &ClusterArgs) -> Result<RunArtifacts> {
    ensure_dir(&args.out_dir)?;
    let input = load_training_input(&args.input)?;
    let (grams, ids): (Vec<GramMatrix>, Vec<String>) = match input {
        TrainingInput::Features(dataset, specs) => {
            let grams = specs
                .iter()
                .enumerate()
                .map(|(g, spec)| gram(&dataset.views[g], &dataset.views[g], spec))
                .collect::<Result<Vec<_>>>()?;
            (grams, dataset.sample_ids)
        }
        TrainingInput::Precomputed(raw, ids) => {
            let grams = raw
                .into_iter()
                .enumerate()
                .map(|(g, values)| crate::kernels::precomputed_gram(values, g))
                .collect::<Result<Vec<_>>>()?;
            (grams, ids)
        }
    };
    let avg = average_gram(&grams)?;
    let mut model = clustering::kernel_kmeans(&avg, args.clusters, args.seed, args.restarts)?;
    model.base_gram_ref = format!("uniform-average({} views)", grams.len());
    if let Some(t) = args.temperature {
        model.temperature = t;
    }
    let membership = clustering::train_memberships(&model, &avg, model.temperature)?;

    let assignments_path = args.out_dir.join("assignments.csv");
    let mut out = String::from("sample_id,cluster\n");
    for (id, &c) in ids.iter().zip(&model.labels) {
        out.push_str(&format!("{id},{c}\n"));
    }
    std::fs::write(&assignments_path, out).map_err(|e| Error::Io {
        path: assignments_path.display().to_string(),
        source: e,
    })?;

    let membership_path = args.out_dir.join("memberships.csv");
    let mut out = String::from("sample_id");
    for c in 0..model.cluster_count {
        out.push_str(&format!(",p{c}"));
    }
    out.push('\n');
    for (i, id) in ids.iter().enumerate() {
        out.push_str(id);
        for c in 0..model.cluster_count {
            out.push_str(&format!(",{}", membership.probs[(i, c)]));
        }
        out.push('\n');
    }
    std::fs::write(&membership_path, out).map_err(|e| Error::Io {
        path: membership_path.display().to_string(),
        source: e,
    })?;

    Ok(RunArtifacts {
        command: "cluster",
        config: Some(serde_json::json!({
            "clusters": args.clusters,
            "seed": args.seed,
            "restarts": args.restarts,
            "temperature": model.temperature,
            "base_gram_ref": model.base_gram_ref,
        })),
        inputs: input_paths(&args.input),
        outputs: vec![assignments_path, membership_path],
        seed: Some(args.seed),
        manifest_path: args.out_dir.join("cluster.manifest.json"),
    })
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

fn cmd_train(args: &TrainArgs) -> Result<RunArtifacts> {
    let input = load_training_input(&args.input)?;
    let cfg = args.flags.resolve(input.n())?;
    let model = fit_from_input(input, &cfg)?;
    if !model.trace.converged {
        let message = format!(
            "training did not converge within {} iterations (last λ-change {:.3e})",
            model.trace.iterations,
            model.trace.lambda_changes.last().copied().unwrap_or(f64::NAN)
        );
        if args.strict_convergence {
            return Err(Error::InvalidParam(message));
        }
        report_warning("non-convergence", message);
    }
    save_model(&model, &args.model)?;
    let trace_path = args
        .trace
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.trace.json", args.model.display())));
    write_json(&trace_path, &model.trace)?;

    let mut inputs = input_paths(&args.input);
    if let Some(cfg_path) = &args.flags.config {
        inputs.push(cfg_path.clone());
    }
    let manifest_path = PathBuf::from(format!("{}.manifest.json", args.model.display()));
    Ok(RunArtifacts {
        command: "train",
        config: Some(serde_json::to_value(&cfg).map_err(|e| Error::Internal(e.to_string()))?),
        inputs,
        outputs: vec![args.model.clone(), trace_path],
        seed: Some(cfg.rng_seed),
        manifest_path,
    })
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

fn cmd_score(args: &ScoreArgs) -> Result<RunArtifacts> {
    let model = load_model(&args.model)?;
    let report = if !args.views.is_empty() {
        let queries = load_dataset(&args.views, None)?;
        model.project(&queries)?
    } else if !args.query_grams.is_empty() {
        let mut query_grams = Vec::with_capacity(args.query_grams.len());
        for path in &args.query_grams {
            query_grams.push(load_gram_csv(path)?);
        }
        let diag_path = args.query_diags.as_ref().ok_or_else(|| {
            Error::InvalidParam("--query-diags is required with --query-grams".into())
        })?;
        let diag = load_gram_csv(diag_path)?;
        if diag.ncols() != query_grams.len() {
            return Err(Error::DimensionMismatch(format!(
                "query diag has {} columns for {} views",
                diag.ncols(),
                query_grams.len()
            )));
        }
        let diags: Vec<Vec<f64>> = (0..diag.ncols())
            .map(|g| diag.column(g).to_vec())
            .collect();
        let m = query_grams[0].nrows();
        let ids = (0..m).map(|i| format!("q{i:06}")).collect();
        model.project_precomputed(&query_grams, &diags, ids)?
    } else {
        return Err(Error::InvalidParam(
            "provide --views or --query-grams".into(),
        ));
    };
    let scores: Vec<f64> = report
        .scores
        .iter()
        .map(|&s| args.score_mode.apply(s))
        .collect();
    write_scores_csv(&args.output, &report.sample_ids, &scores)?;

    let mut inputs = vec![args.model.clone()];
    inputs.extend(args.views.iter().cloned());
    inputs.extend(args.query_grams.iter().cloned());
    if let Some(d) = &args.query_diags {
        inputs.push(d.clone());
    }
    let manifest_path = PathBuf::from(format!("{}.manifest.json", args.output.display()));
    Ok(RunArtifacts {
        command: "score",
        config: Some(serde_json::json!({ "score_mode": args.score_mode })),
        inputs,
        outputs: vec![args.output.clone()],
        seed: None,
        manifest_path,
    })
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct EvalCliReport {
    auc: f64,
    eer: Option<f64>,
    threshold: Option<f64>,
    hter: Option<HterReport>,
    acer: Option<AcerReport>,
}

fn eval_set_from_files(scores_path: &Path, labels_path: &Path) -> Result<EvalSet> {
    let (ids, scores) = read_scores_csv(scores_path)?;
    let labels_map = load_labels(labels_path)?;
    let mut labels = Vec::with_capacity(ids.len());
    for id in &ids {
        let label = labels_map.get(id).cloned().ok_or_else(|| Error::Csv {
            path: labels_path.display().to_string(),
            message: format!("no label for sample id {id:?}"),
        })?;
        labels.push(label);
    }
    EvalSet::new(scores, labels)
}

fn cmd_eval(args: &EvalArgs) -> Result<RunArtifacts> {
    let test = eval_set_from_files(&args.scores, &args.labels)?;
    let auc_value = auc(&test, args.orientation)?;
    let eer = eer_threshold(&test, args.orientation).ok();
    let hter_report = match (&args.dev_scores, &args.dev_labels) {
        (Some(ds), Some(dl)) => {
            let dev = eval_set_from_files(ds, dl)?;
            Some(hter(&dev, &test, args.orientation)?)
        }
        _ => None,
    };
    let threshold = args
        .threshold
        .or(hter_report.as_ref().map(|h| h.threshold));
    let acer_report = match threshold {
        Some(t) => match acer(&test, t, args.orientation) {
            Ok(r) => Some(r),
            Err(Error::MissingInstrumentTags) => {
                report_warning(
                    "missing-instrument-tags",
                    "non-target samples lack instrument tags; ACER skipped".into(),
                );
                None
            }
            Err(e) => return Err(e),
        },
        None => None,
    };
    let report = EvalCliReport {
        auc: auc_value,
        eer: eer.map(|p| p.eer),
        threshold,
        hter: hter_report,
        acer: acer_report,
    };
    write_json(&args.output, &report)?;
    let mut outputs = vec![args.output.clone()];
    if let Some(csv_path) = &args.csv {
        let mut out = String::from("metric,value\n");
        out.push_str(&format!("auc,{}\n", report.auc));
        if let Some(e) = report.eer {
            out.push_str(&format!("eer,{e}\n"));
        }
        if let Some(t) = report.threshold {
            out.push_str(&format!("threshold,{t}\n"));
        }
        if let Some(h) = &report.hter {
            out.push_str(&format!("far,{}\nfrr,{}\nhter,{}\n", h.far, h.frr, h.hter));
        }
        if let Some(a) = &report.acer {
            out.push_str(&format!("bpcer,{}\n", a.bpcer));
            for (tag, rate) in &a.apcer_per_instrument {
                out.push_str(&format!("apcer[{tag}],{rate}\n"));
            }
            out.push_str(&format!("acer,{}\n", a.acer));
        }
        std::fs::write(csv_path, out).map_err(|e| Error::Io {
            path: csv_path.display().to_string(),
            source: e,
        })?;
        outputs.push(csv_path.clone());
    }

    let mut inputs = vec![args.scores.clone(), args.labels.clone()];
    if let Some(p) = &args.dev_scores {
        inputs.push(p.clone());
    }
    if let Some(p) = &args.dev_labels {
        inputs.push(p.clone());
    }
    let manifest_path = PathBuf::from(format!("{}.manifest.json", args.output.display()));
    Ok(RunArtifacts {
        command: "eval",
        config: Some(serde_json::json!({
            "orientation": args.orientation,
            "threshold": args.threshold,
        })),
        inputs,
        outputs,
        seed: None,
        manifest_path,
    })
}

// ---------------------------------------------------------------------------
// tune
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct TuneCliReport {
    metric: SelectionMetric,
    best_score: f64,
    best: MklConfig,
    cells: Vec<GridCell>,
}

fn cmd_tune(args: &TuneArgs) -> Result<RunArtifacts> {
    if args.dev_views.is_empty() {
        return Err(Error::InvalidParam("provide --dev-views".into()));
    }
    let input = load_training_input(&args.input)?;
    let TrainingInput::Features(train, specs) = input else {
        return Err(Error::InvalidParam(
            "tune needs feature views (dev queries must be scorable)".into(),
        ));
    };
    let dev = load_dataset(&args.dev_views, Some(&args.dev_labels))?;
    let dev_labels = dev.labels.clone().expect("labels loaded");
    let overlap = dev
        .sample_ids
        .iter()
        .filter(|id| train.sample_ids.contains(id))
        .count();
    if overlap > 0 {
        report_warning(
            "dev-train-overlap",
            format!("{overlap} dev sample ids also appear in the training set"),
        );
    }

    // δ placeholder; the grid overwrites (δ, p, q) per cell
    let flags_delta_fallback = ConfigFlags {
        delta: args.flags.delta.or(Some(1.0)),
        config: args.flags.config.clone(),
        p: args.flags.p,
        q: args.flags.q,
        theta: args.flags.theta,
        clusters: args.flags.clusters,
        regime: args.flags.regime,
        tol: args.flags.tol,
        max_iter: args.flags.max_iter,
        seed: args.flags.seed,
        temperature: args.flags.temperature,
        kmeans_restarts: args.flags.kmeans_restarts,
    };
    let base = flags_delta_fallback.resolve(train.n())?;
    let grid = match &args.grid {
        Some(path) => {
            let raw = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            serde_json::from_str::<GridSpec>(&raw).map_err(|e| Error::Archive {
                path: path.display().to_string(),
                message: e.to_string(),
            })?
        }
        None => GridSpec::default(),
    };
    let metric = args.metric;
    let result = grid_search(&grid, &base, train.n(), |cfg| {
        let model = fit_with_specs(&train, &specs, cfg)?;
        if !model.trace.converged {
            return Err(Error::InvalidParam(format!(
                "did not converge within {} iterations",
                cfg.max_iter
            )));
        }
        let report = model.project(&dev)?;
        let eval = EvalSet::new(report.scores, dev_labels.clone())?;
        match metric {
            SelectionMetric::Auc => auc(&eval, Orientation::HigherIsTarget),
            SelectionMetric::OneMinusEer => {
                Ok(1.0 - eer_threshold(&eval, Orientation::HigherIsTarget)?.eer)
            }
        }
    })?;
    let report = TuneCliReport {
        metric,
        best_score: result.best_score,
        best: result.best,
        cells: result.cells,
    };
    write_json(&args.output, &report)?;
    let best_config_path = args
        .best_config
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.best-config.json", args.output.display())));
    write_json(&best_config_path, &report.best)?;
    let mut outputs = vec![args.output.clone(), best_config_path];
    if let Some(csv_path) = &args.csv {
        let mut out = String::from("delta_multiplier,delta,p,q,score,error\n");
        for cell in &report.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                cell.delta_multiplier,
                cell.delta,
                cell.p,
                cell.q,
                cell.score.map(|s| s.to_string()).unwrap_or_default(),
                cell.error.as_deref().unwrap_or("").replace(',', ";"),
            ));
        }
        std::fs::write(csv_path, out).map_err(|e| Error::Io {
            path: csv_path.display().to_string(),
            source: e,
        })?;
        outputs.push(csv_path.clone());
    }

    let mut inputs = input_paths(&args.input);
    inputs.extend(args.dev_views.iter().cloned());
    inputs.push(args.dev_labels.clone());
    if let Some(p) = &args.grid {
        inputs.push(p.clone());
    }
    if let Some(p) = &args.flags.config {
        inputs.push(p.clone());
    }
    let manifest_path = PathBuf::from(format!("{}.manifest.json", args.output.display()));
    Ok(RunArtifacts {
        command: "tune",
        config: Some(serde_json::to_value(&report.best).map_err(|e| Error::Internal(e.to_string()))?),
        inputs,
        outputs,
        seed: Some(report.best.rng_seed),
        manifest_path,
    })
}

// ---------------------------------------------------------------------------
// diagnose
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct DiagnoseCliReport {
    input: BoundInput,
    bounds: BoundReport,
    lambda: LambdaNormDiagnostic,
    generalisation: GeneralisationBound,
    empirical_loss: f64,
}

fn training_self_scores(model: &TrainedModel) -> Result<Vec<f64>> {
    if model.is_precomputed() {
        let grams = model.train_grams.as_ref().expect("validated precomputed");
        let diags: Vec<Vec<f64>> = grams
            .iter()
            .map(|g| (0..g.nrows()).map(|i| g[(i, i)]).collect())
            .collect();
        Ok(model
            .project_precomputed(grams, &diags, model.sample_ids.clone())?
            .scores)
    } else {
        let dataset = FeatureDataset {
            views: model.train_views.clone(),
            sample_ids: model.sample_ids.clone(),
            labels: None,
        };
        Ok(model.project(&dataset)?.scores)
    }
}

fn cmd_diagnose(args: &DiagnoseArgs) -> Result<RunArtifacts> {
    let model = load_model(&args.model)?;
    let input = BoundInput::from_model(&model)?;
    let bounds = regime_bounds(&input)?;
    let lambda = lambda_norm_check(&model)?;
    let self_scores = training_self_scores(&model)?;
    let empirical_loss = self_scores
        .iter()
        .map(|s| (s - 1.0) * (s - 1.0))
        .sum::<f64>()
        / self_scores.len() as f64;
    let generalisation =
        generalisation_bound(empirical_loss, &input, args.loss_bound, args.confidence)?;
    let report = DiagnoseCliReport {
        input,
        bounds,
        lambda,
        generalisation,
        empirical_loss,
    };
    write_json(&args.output, &report)?;
    let manifest_path = PathBuf::from(format!("{}.manifest.json", args.output.display()));
    Ok(RunArtifacts {
        command: "diagnose",
        config: Some(serde_json::json!({
            "loss_bound": args.loss_bound,
            "confidence": args.confidence,
        })),
        inputs: vec![args.model.clone()],
        outputs: vec![args.output.clone()],
        seed: None,
        manifest_path,
    })
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

fn cmd_synth(args: &SynthArgs) -> Result<RunArtifacts> {
    ensure_dir(&args.out_dir)?;
    let spec = LocalitySpec {
        clusters: args.clusters,
        dims_per_view: args.dims_per_view,
        train_per_cluster: args.train_per_cluster,
        test_targets_per_cluster: args.test_targets_per_cluster,
        test_outliers: args.test_outliers,
        signal_scale: args.signal_scale,
        signal_noise: args.signal_noise,
        noise_sigma: args.noise_sigma,
        seed: args.seed,
    };
    let (train, test) = locality_dataset(&spec)?;
    let mut outputs = Vec::new();
    for (g, view) in train.views.iter().enumerate() {
        let path = args.out_dir.join(format!("train_view{g}.csv"));
        write_view_csv(&path, &train.sample_ids, view)?;
        outputs.push(path);
    }
    for (g, view) in test.views.iter().enumerate() {
        let path = args.out_dir.join(format!("test_view{g}.csv"));
        write_view_csv(&path, &test.sample_ids, view)?;
        outputs.push(path);
    }
    let train_labels: Vec<Label> = train
        .sample_ids
        .iter()
        .map(|_| Label {
            target: true,
            instrument: None,
        })
        .collect();
    let train_labels_path = args.out_dir.join("train_labels.csv");
    write_labels_csv(&train_labels_path, &train.sample_ids, &train_labels)?;
    outputs.push(train_labels_path);
    let test_labels_path = args.out_dir.join("test_labels.csv");
    write_labels_csv(
        &test_labels_path,
        &test.sample_ids,
        test.labels.as_ref().expect("synth test labels"),
    )?;
    outputs.push(test_labels_path);

    Ok(RunArtifacts {
        command: "synth",
        config: Some(serde_json::json!({
            "clusters": spec.clusters,
            "dims_per_view": spec.dims_per_view,
            "train_per_cluster": spec.train_per_cluster,
            "test_targets_per_cluster": spec.test_targets_per_cluster,
            "test_outliers": spec.test_outliers,
            "signal_scale": spec.signal_scale,
            "signal_noise": spec.signal_noise,
            "noise_sigma": spec.noise_sigma,
        })),
        inputs: Vec::new(),
        outputs,
        seed: Some(args.seed),
        manifest_path: args.out_dir.join("synth.manifest.json"),
    })
}
