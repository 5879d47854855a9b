//! Command-line surface: synth / pretrain / train / eval / influence /
//! sweep, with JSON config files, named presets, and flag overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataio::{
    load_dataset_with, load_features_and_labels, save_dataset, write_embeddings_tsv,
    write_history_jsonl, Checkpoint, Dataset,
};
use crate::graph::{
    cumulative_influence, normalize_adjacency, sbm_generate, single_power_influence,
    InfluenceMatrix, KnnMetric,
};
use crate::inference::{evaluate, TrainedModel};
use crate::losses::Variant;
use crate::pipeline::{pretrain, run_full, train, TrainConfig};
use crate::presets::{preset_json, preset_names};
use crate::rng::RngState;

#[derive(Parser)]
#[command(
    name = "scgc",
    version,
    about = "Self-supervised contrastive graph clustering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a stochastic block model fixture dataset directory
    Synth(SynthArgs),
    /// Reconstruction pretraining plus K-means centroid initialization
    Pretrain(PretrainArgs),
    /// Joint self-supervised training from a pretrained checkpoint
    Train(TrainArgs),
    /// Evaluate a checkpoint: metrics (when labels exist) and embeddings
    Eval(EvalArgs),
    /// Inspect the influence matrix of a dataset
    Influence(InfluenceArgs),
    /// Run a config grid with repeated seeds and summarize
    Sweep(SweepArgs),
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    match s {
        "scgc" => Ok(Variant::Scgc),
        "scgc-star" => Ok(Variant::ScgcStar),
        other => Err(format!("unknown variant `{other}` (use scgc or scgc-star)")),
    }
}

fn parse_knn_metric(s: &str) -> std::result::Result<KnnMetric, String> {
    match s {
        "euclidean" => Ok(KnnMetric::Euclidean),
        "cosine" => Ok(KnnMetric::Cosine),
        other => Err(format!(
            "unknown metric `{other}` (use euclidean or cosine)"
        )),
    }
}

/// Config sources and per-field overrides. Precedence: defaults, then
/// `--preset`, then `--config`, then explicit flags.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// JSON config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset overlay (see `--preset list`)
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Influence hop depth R
    #[arg(long)]
    hops: Option<usize>,
    /// Epoch count for this command's phase
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Force full-batch training on or off
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    full_batch: Option<bool>,
    /// Cluster count C (defaults to the label class count when present)
    #[arg(long)]
    clusters: Option<usize>,
}

/// Which epoch field `--epochs` refers to.
enum EpochPhase {
    Pretrain,
    Train,
}

fn merge_overlay(base: &mut Value, overlay: Value, source: &str) -> Result<()> {
    let Value::Object(map) = overlay else {
        bail!("{source}: config overlay must be a JSON object");
    };
    let target = base
        .as_object_mut()
        .expect("defaults serialize to an object");
    for (key, value) in map {
        // the `k` alias normalizes to `hops` so overlays merge cleanly
        let key = if key == "k" { "hops".to_string() } else { key };
        target.insert(key, value);
    }
    Ok(())
}

impl ConfigArgs {
    /// Defaults, then preset, then config file, then flags.
    fn resolve(&self, phase: EpochPhase, label_classes: usize) -> Result<TrainConfig> {
        let mut merged = serde_json::to_value(TrainConfig::default())?;
        if let Some(name) = &self.preset {
            let json = preset_json(name).ok_or_else(|| {
                anyhow!(
                    "unknown preset `{name}`; available: {}",
                    preset_names().join(", ")
                )
            })?;
            merge_overlay(&mut merged, serde_json::from_str(json)?, name)?;
        }
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let overlay: Value = serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?;
            merge_overlay(&mut merged, overlay, &path.display().to_string())?;
        }
        let config: TrainConfig = serde_json::from_value(merged).context("invalid config")?;
        self.apply_flags(config, phase, label_classes)
    }

    fn apply_flags(
        &self,
        mut config: TrainConfig,
        phase: EpochPhase,
        label_classes: usize,
    ) -> Result<TrainConfig> {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(variant) = self.variant {
            config.variant = variant;
        }
        if let Some(alpha) = self.alpha {
            config.alpha = alpha;
        }
        if let Some(beta) = self.beta {
            config.beta = beta;
        }
        if let Some(tau) = self.tau {
            config.tau = tau;
        }
        if let Some(hops) = self.hops {
            config.hops = hops;
        }
        if let Some(epochs) = self.epochs {
            match phase {
                EpochPhase::Pretrain => config.pretrain_epochs = epochs,
                EpochPhase::Train => config.train_epochs = epochs,
            }
        }
        if let Some(batch_size) = self.batch_size {
            config.batch_size = batch_size;
            // asking for a batch size implies batched training unless
            // full-batch was forced explicitly
            if self.full_batch.is_none() {
                config.full_batch = false;
            }
        }
        if let Some(full_batch) = self.full_batch {
            config.full_batch = full_batch;
        }
        if let Some(clusters) = self.clusters {
            config.cluster_count = clusters;
        }
        if config.cluster_count == 0 {
            if label_classes >= 2 {
                config.cluster_count = label_classes;
            } else {
                bail!("cluster count unknown: pass --clusters or set cluster_count in the config");
            }
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset directory (features.tsv [+ edges.txt] [+ labels.txt])
    #[arg(long)]
    data: PathBuf,
    /// Build a KNN graph from features with this neighbor count
    #[arg(long)]
    knn_k: Option<usize>,
    /// Distance for KNN construction
    #[arg(long, value_parser = parse_knn_metric, default_value = "euclidean")]
    knn_metric: KnnMetric,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        load_dataset_with(&self.data, self.knn_k, self.knn_metric)
            .with_context(|| format!("loading dataset {}", self.data.display()))
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated block sizes, e.g. 100,100,100
    #[arg(long, default_value = "100,100,100")]
    blocks: String,
    #[arg(long, default_value_t = 0.1)]
    p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    p_out: f64,
    #[arg(long, default_value_t = 16)]
    feature_dim: usize,
    #[arg(long, default_value_t = 0.5)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PretrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Pretrained checkpoint (from `scgc pretrain`)
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
    /// Also write embeddings to this extra path
    #[arg(long)]
    export_embeddings: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset directory; only features.tsv (and labels.txt, if present)
    /// are read — evaluation never touches graph structure
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Directory for metrics.json and embeddings.tsv
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    export_embeddings: Option<PathBuf>,
}

#[derive(Args)]
struct InfluenceArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 1)]
    hops: usize,
    /// cumulative (sum of powers 1..=R) or single (one power)
    #[arg(long, default_value = "cumulative")]
    mode: String,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Grid file: {"base": {...}, "grid": {"alpha": [0.5, 1.0]}, "seeds": [0, 1]}
    #[arg(long)]
    grid: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
}

/// Entry point used by the binary and by tests. Returns the process exit
/// code: 0 on success, 2 for usage errors, 1 for runtime failures.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Pretrain(args) => cmd_pretrain(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Influence(args) => cmd_influence(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let blocks: Vec<usize> = args
        .blocks
        .split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|e| anyhow!("bad block size `{t}`: {e}"))
        })
        .collect::<Result<_>>()?;
    let mut rng = RngState::new(args.seed);
    let (graph, features, labels) = sbm_generate(
        &blocks,
        args.p_in,
        args.p_out,
        args.feature_dim,
        args.noise_sigma,
        &mut rng,
    )?;
    let class_count = blocks.len();
    let dataset = Dataset {
        name: args
            .out
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "synthetic".into()),
        features,
        graph,
        labels: Some(labels),
        class_count,
    };
    save_dataset(&args.out, &dataset)?;
    println!(
        "wrote {} nodes, {} edges, {} classes to {}",
        dataset.features.rows(),
        dataset.graph.edge_count(),
        class_count,
        args.out.display()
    );
    Ok(())
}

fn cmd_pretrain(args: PretrainArgs) -> Result<()> {
    let dataset = args.data.load()?;
    let config = args
        .config
        .resolve(EpochPhase::Pretrain, dataset.class_count)?;
    let pre = pretrain(&dataset.features, &config)?;

    fs::create_dir_all(&args.out)?;
    write_json(&args.out.join("config.json"), &config)?;
    let model = TrainedModel {
        params: pre.params,
        centroids: pre.centroids,
        eta: config.eta,
    };
    Checkpoint::new(config.seed, model).save(&args.out.join("checkpoint.json"))?;

    let mut lines = String::new();
    for (epoch, recon) in pre.recon_history.iter().enumerate() {
        lines.push_str(&serde_json::to_string(
            &serde_json::json!({"epoch": epoch, "recon": recon}),
        )?);
        lines.push('\n');
    }
    fs::write(args.out.join("pretrain_history.jsonl"), lines)?;
    println!(
        "pretrained {} epochs, final reconstruction {:.6}; checkpoint at {}",
        pre.recon_history.len(),
        pre.recon_history.last().copied().unwrap_or(f64::NAN),
        args.out.join("checkpoint.json").display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let dataset = args.data.load()?;
    let config = args
        .config
        .resolve(EpochPhase::Train, dataset.class_count)?;
    let checkpoint = Checkpoint::load(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;

    let (model, history) = train(
        &dataset.features,
        &dataset.graph,
        dataset.labels.as_deref(),
        &config,
        checkpoint.model.params,
        checkpoint.model.centroids,
    )?;

    fs::create_dir_all(&args.out)?;
    write_json(&args.out.join("config.json"), &config)?;
    write_history_jsonl(&args.out.join("history.jsonl"), &history)?;
    Checkpoint::new(config.seed, model.clone()).save(&args.out.join("checkpoint.json"))?;

    let evaluation = evaluate(&model, &dataset.features, dataset.labels.as_deref())?;
    if let Some(report) = &evaluation.report {
        write_json(&args.out.join("metrics.json"), report)?;
        println!(
            "final acc {:.4} nmi {:.4} ari {:.4} f1 {:.4}",
            report.acc, report.nmi, report.ari, report.f1
        );
    } else {
        println!("trained without labels; no metrics written");
    }
    write_embeddings_tsv(&args.out.join("embeddings.tsv"), &evaluation.embeddings)?;
    if let Some(extra) = &args.export_embeddings {
        write_embeddings_tsv(extra, &evaluation.embeddings)?;
    }
    println!("run artifacts in {}", args.out.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let (features, labels) = load_features_and_labels(&args.data)?;
    let checkpoint = Checkpoint::load(&args.checkpoint)
        .with_context(|| format!("loading checkpoint {}", args.checkpoint.display()))?;
    let evaluation = evaluate(&checkpoint.model, &features, labels.as_deref())?;

    match &evaluation.report {
        Some(report) => {
            println!("{}", serde_json::to_string_pretty(report)?);
        }
        None => println!("no labels in dataset; skipping metrics"),
    }
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        if let Some(report) = &evaluation.report {
            write_json(&out.join("metrics.json"), report)?;
        }
        write_embeddings_tsv(&out.join("embeddings.tsv"), &evaluation.embeddings)?;
    }
    if let Some(extra) = &args.export_embeddings {
        write_embeddings_tsv(extra, &evaluation.embeddings)?;
    }
    Ok(())
}

fn cmd_influence(args: InfluenceArgs) -> Result<()> {
    let dataset = args.data.load()?;
    let a_hat = normalize_adjacency(&dataset.graph);
    let influence: InfluenceMatrix = match args.mode.as_str() {
        "cumulative" => cumulative_influence(&a_hat, args.hops)?,
        "single" => single_power_influence(&a_hat, args.hops)?,
        other => bail!("unknown mode `{other}` (use cumulative or single)"),
    };
    let gamma = influence.gamma();
    let n = influence.n();
    let mut nonzero = 0usize;
    let (mut min_nz, mut max, mut sum) = (f64::INFINITY, 0.0f64, 0.0f64);
    for &v in gamma.data() {
        if v != 0.0 {
            nonzero += 1;
            min_nz = min_nz.min(v);
            sum += v;
        }
        max = max.max(v);
    }
    println!("nodes: {n}");
    println!("hops: {}", influence.hops());
    println!("mode: {}", args.mode);
    println!("nonzero: {nonzero}");
    println!("density: {:.6}", nonzero as f64 / (n * n) as f64);
    println!(
        "min_nonzero: {:.6e}",
        if nonzero > 0 { min_nz } else { 0.0 }
    );
    println!("max: {max:.6e}");
    println!(
        "mean_nonzero: {:.6e}",
        if nonzero > 0 {
            sum / nonzero as f64
        } else {
            0.0
        }
    );
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSpec {
    #[serde(default)]
    base: Option<Value>,
    #[serde(default)]
    grid: Option<BTreeMap<String, Vec<Value>>>,
    #[serde(default)]
    seeds: Option<Vec<u64>>,
}

#[derive(Serialize)]
struct SweepRun {
    combo_index: usize,
    params: Value,
    seed: u64,
    acc: Option<f64>,
    nmi: Option<f64>,
    ari: Option<f64>,
    f1: Option<f64>,
    final_total: f64,
    wall_secs: f64,
}

#[derive(Serialize)]
struct SweepAggregate {
    combo_index: usize,
    params: Value,
    runs: usize,
    acc_mean: Option<f64>,
    acc_std: Option<f64>,
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let dataset = args.data.load()?;
    let text = fs::read_to_string(&args.grid)
        .with_context(|| format!("reading grid {}", args.grid.display()))?;
    let spec: SweepSpec = serde_json::from_str(&text)?;
    let seeds = spec.seeds.unwrap_or_else(|| vec![0]);
    if seeds.is_empty() {
        bail!("grid file lists no seeds");
    }

    // expand the cartesian product over sorted keys
    let grid = spec.grid.unwrap_or_default();
    let keys: Vec<&String> = grid.keys().collect();
    let mut combos: Vec<Vec<(String, Value)>> = vec![Vec::new()];
    for key in &keys {
        let values = &grid[*key];
        if values.is_empty() {
            bail!("grid key `{key}` has no values");
        }
        let mut next = Vec::with_capacity(combos.len() * values.len());
        for combo in &combos {
            for value in values {
                let mut extended = combo.clone();
                extended.push(((*key).clone(), value.clone()));
                next.push(extended);
            }
        }
        combos = next;
    }

    fs::create_dir_all(&args.out)?;
    let mut runs = Vec::new();
    let mut aggregates = Vec::new();
    for (combo_index, combo) in combos.iter().enumerate() {
        let mut combo_accs = Vec::new();
        let params = Value::Object(combo.iter().cloned().collect());
        for &seed in &seeds {
            let mut merged = serde_json::to_value(TrainConfig::default())?;
            if let Some(base) = &spec.base {
                merge_overlay(&mut merged, base.clone(), "grid base")?;
            }
            merge_overlay(&mut merged, params.clone(), "grid combo")?;
            let config: TrainConfig =
                serde_json::from_value(merged).context("invalid grid config")?;
            // flag overrides still apply on top of the grid; the grid's
            // seed list wins over any --seed flag
            let flags = ConfigArgs {
                config: None,
                preset: None,
                seed: Some(seed),
                ..args.config.clone()
            };
            let config = flags.apply_flags(config, EpochPhase::Train, dataset.class_count)?;

            let run_dir = args
                .out
                .join(format!("combo{combo_index:03}"))
                .join(format!("seed{seed}"));
            fs::create_dir_all(&run_dir)?;

            let started = Instant::now();
            let output = run_full(
                &dataset.features,
                &dataset.graph,
                dataset.labels.as_deref(),
                &config,
            )?;
            let wall_secs = started.elapsed().as_secs_f64();

            write_json(&run_dir.join("config.json"), &config)?;
            write_history_jsonl(&run_dir.join("history.jsonl"), &output.history)?;
            Checkpoint::new(seed, output.model.clone()).save(&run_dir.join("checkpoint.json"))?;
            write_embeddings_tsv(
                &run_dir.join("embeddings.tsv"),
                &output.evaluation.embeddings,
            )?;
            if let Some(report) = &output.evaluation.report {
                write_json(&run_dir.join("metrics.json"), report)?;
            }

            let report = output.evaluation.report.as_ref();
            if let Some(r) = report {
                combo_accs.push(r.acc);
            }
            runs.push(SweepRun {
                combo_index,
                params: params.clone(),
                seed,
                acc: report.map(|r| r.acc),
                nmi: report.map(|r| r.nmi),
                ari: report.map(|r| r.ari),
                f1: report.map(|r| r.f1),
                final_total: output.history.epochs.last().map_or(f64::NAN, |e| e.total),
                wall_secs,
            });
            println!(
                "combo {combo_index} seed {seed}: acc {}",
                report.map_or("n/a".into(), |r| format!("{:.4}", r.acc))
            );
        }
        let (acc_mean, acc_std) = if combo_accs.is_empty() {
            (None, None)
        } else {
            let mean = combo_accs.iter().sum::<f64>() / combo_accs.len() as f64;
            let var = combo_accs
                .iter()
                .map(|a| (a - mean) * (a - mean))
                .sum::<f64>()
                / combo_accs.len() as f64;
            (Some(mean), Some(var.sqrt()))
        };
        aggregates.push(SweepAggregate {
            combo_index,
            params,
            runs: seeds.len(),
            acc_mean,
            acc_std,
        });
    }

    write_json(
        &args.out.join("summary.json"),
        &serde_json::json!({"runs": runs, "aggregates": aggregates}),
    )?;
    println!(
        "sweep summary in {}",
        args.out.join("summary.json").display()
    );
    Ok(())
}
