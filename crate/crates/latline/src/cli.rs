//! Command-line pipeline: gen-demos -> train-embed -> eval-embed ->
//! train-rl -> compare.
//!
//! Every subcommand takes an optional JSON config file plus flags that
//! mirror the config keys one to one; precedence is flags > config file >
//! defaults. Unknown config keys are rejected. Each output directory gets a
//! `run_manifest.json` recording the command, the fully resolved config,
//! input digests, and output paths; reruns with the same config and inputs
//! produce byte-identical data files.
//!
//! Exit codes: 0 success, 1 gate failure (quality floor, divergence), 2
//! usage error (bad flags, unknown config keys, missing inputs).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::data::{load_trajectories, TripletDataset};
use crate::demos::{build_dataset, DemoSource};
use crate::embedding::{
    eval_metric, select_best_seed, train_seeds, Checkpoint, TrainConfig, TrainedRun,
};
use crate::envs::{do_nothing_band_upper, ObsMode, Task};
use crate::report::fnv1a_hex;
use crate::rl::{seed_sweep, RLConfig, TaskEnv};
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "latline",
    version,
    about = "Trajectory-linear state embeddings and the RL comparison pipeline"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a demonstration dataset (trajectories + controls + manifest).
    GenDemos(GenDemosArgs),
    /// Train the embedding over several seeds and select the best by the
    /// linearity metric.
    TrainEmbed(TrainEmbedArgs),
    /// Score a trained embedding on a trajectory file.
    EvalEmbed(EvalEmbedArgs),
    /// Seed-sweep the policy-gradient learner under one observation mode.
    TrainRl(TrainRlArgs),
    /// Join sweep outputs into one comparison table.
    Compare(CompareArgs),
}

/// Exit code for a pipeline error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Gate(_) | Error::NonFinite(_) => 1,
        _ => 2,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenDemos(args) => gen_demos(args),
        Command::TrainEmbed(args) => train_embed(args),
        Command::EvalEmbed(args) => eval_embed(args),
        Command::TrainRl(args) => train_rl(args),
        Command::Compare(args) => compare(args),
    }
}

// ---------------------------------------------------------------------------
// Config plumbing.

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
        }
    }
}

fn require_input(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        return Err(Error::Config(format!(
            "{what} not found: {}",
            path.display()
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    fnv64: String,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config: serde_json::Value,
    seeds: Vec<u64>,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
    wall_clock_secs: f64,
}

fn digest_inputs(paths: &[&Path]) -> Result<Vec<InputDigest>> {
    paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p)?;
            Ok(InputDigest {
                path: p.display().to_string(),
                fnv64: fnv1a_hex(&bytes),
            })
        })
        .collect()
}

fn write_manifest(out_dir: &Path, manifest: &RunManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(out_dir.join("run_manifest.json"), text + "\n")?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

// ---------------------------------------------------------------------------
// gen-demos

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenDemosConfig {
    pub env: String,
    pub source: String,
    pub count: usize,
    pub seed: u64,
    pub success_floor: f64,
}

impl Default for GenDemosConfig {
    fn default() -> Self {
        Self {
            env: "cartpole-swingup".into(),
            source: "scripted".into(),
            count: 200,
            seed: 0,
            success_floor: 0.9,
        }
    }
}

#[derive(Args, Debug)]
pub struct GenDemosArgs {
    /// JSON config file (flags override its keys).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Environment id: cartpole-balance, cartpole-swingup, or reacher.
    #[arg(long)]
    pub env: Option<String>,
    /// Demo source: scripted or planner.
    #[arg(long)]
    pub source: Option<String>,
    /// Number of successful trajectories to write.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Abort if the success rate over attempts ends below this.
    #[arg(long)]
    pub success_floor: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn gen_demos(args: GenDemosArgs) -> Result<()> {
    let started = Instant::now();
    let mut cfg: GenDemosConfig = load_config(args.config.as_deref())?;
    if let Some(v) = args.env {
        cfg.env = v;
    }
    if let Some(v) = args.source {
        cfg.source = v;
    }
    if let Some(v) = args.count {
        cfg.count = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.success_floor {
        cfg.success_floor = v;
    }

    let task = Task::from_id(&cfg.env)?;
    let source = DemoSource::from_id(&cfg.source)?;
    let (manifest, files) = build_dataset(
        task,
        source,
        cfg.count,
        cfg.seed,
        cfg.success_floor,
        &args.out,
    )?;
    println!(
        "gen-demos: {} trajectories ({} attempts, success rate {:.3}) -> {}",
        manifest.successes,
        manifest.attempts,
        manifest.success_rate,
        args.out.display()
    );

    write_manifest(
        &args.out,
        &RunManifest {
            command: "gen-demos",
            config: serde_json::to_value(&cfg)?,
            seeds: vec![cfg.seed],
            inputs: vec![],
            outputs: vec![
                files.trajectories.display().to_string(),
                files.controls.display().to_string(),
                files.manifest.display().to_string(),
            ],
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
    )
}

// ---------------------------------------------------------------------------
// train-embed

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainEmbedConfig {
    pub lambda: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub z_dim: usize,
    pub triplet_steps: Vec<usize>,
    pub variance_doubling: bool,
    pub hidden: Vec<usize>,
    pub eval_every: usize,
    /// Number of seeds trained (seed, seed+1, ...).
    pub seeds: usize,
}

impl Default for TrainEmbedConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            lambda: t.lambda,
            steps: t.steps,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            seed: t.seed,
            z_dim: t.z_dim,
            triplet_steps: t.triplet_steps,
            variance_doubling: t.variance_doubling,
            hidden: t.hidden,
            eval_every: t.eval_every,
            seeds: 5,
        }
    }
}

impl TrainEmbedConfig {
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lambda: self.lambda,
            steps: self.steps,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed: self.seed,
            z_dim: self.z_dim,
            triplet_steps: self.triplet_steps.clone(),
            variance_doubling: self.variance_doubling,
            hidden: self.hidden.clone(),
            eval_every: self.eval_every,
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainEmbedArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Demonstration trajectory file (JSON-lines).
    #[arg(long)]
    pub demos: PathBuf,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Base seed; runs use seed, seed+1, ...
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub z_dim: Option<usize>,
    /// Triplet index spacings, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub triplet_steps: Option<Vec<usize>>,
    #[arg(long)]
    pub variance_doubling: Option<bool>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Number of seeds to train.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct EmbedRunSummary {
    seed: u64,
    metric_mean: f64,
    metric_std: f64,
    degenerate: bool,
    checkpoint: String,
    log: String,
}

#[derive(Serialize)]
struct EmbedSummary {
    runs: Vec<EmbedRunSummary>,
    failed: Vec<(u64, String)>,
    best_seed: u64,
    best_checkpoint: String,
}

fn train_embed(args: TrainEmbedArgs) -> Result<()> {
    let started = Instant::now();
    let mut cfg: TrainEmbedConfig = load_config(args.config.as_deref())?;
    if let Some(v) = args.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = args.steps {
        cfg.steps = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.z_dim {
        cfg.z_dim = v;
    }
    if let Some(v) = args.triplet_steps {
        cfg.triplet_steps = v;
    }
    if let Some(v) = args.variance_doubling {
        cfg.variance_doubling = v;
    }
    if let Some(v) = args.hidden {
        cfg.hidden = v;
    }
    if let Some(v) = args.eval_every {
        cfg.eval_every = v;
    }
    if let Some(v) = args.seeds {
        cfg.seeds = v;
    }
    if cfg.seeds == 0 {
        return Err(Error::Config("seeds must be >= 1".into()));
    }

    require_input(&args.demos, "demos file")?;
    let trajs = load_trajectories(&args.demos)?;
    if trajs.len() < 2 {
        return Err(Error::Config(format!(
            "need >= 2 demonstration trajectories, got {}",
            trajs.len()
        )));
    }
    let dataset = TripletDataset::from_trajectories(&trajs, &cfg.triplet_steps);
    println!(
        "train-embed: {} trajectories -> {} triplets (spacings {:?})",
        trajs.len(),
        dataset.len(),
        cfg.triplet_steps
    );

    fs::create_dir_all(&args.out)?;
    let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|k| cfg.seed + k).collect();
    let results = train_seeds(&cfg.train_config(), &seeds, &dataset, &trajs);

    let mut runs: Vec<TrainedRun> = Vec::new();
    let mut summaries = Vec::new();
    let mut failed = Vec::new();
    let mut outputs = Vec::new();
    for (seed, result) in results {
        match result {
            Ok(run) => {
                let ckpt_path = args.out.join(format!("model_seed{seed}.json"));
                let log_path = args.out.join(format!("log_seed{seed}.csv"));
                Checkpoint {
                    model: run.model.clone(),
                    config: TrainConfig {
                        seed,
                        ..cfg.train_config()
                    },
                    seed,
                }
                .save(&ckpt_path)?;
                run.log.write_csv(&log_path)?;
                let report = &run.log.final_report;
                println!(
                    "  seed {seed}: metric mean {:.4} std {:.4}{}",
                    report.mean_abs_error,
                    report.std_abs_error,
                    if report.degenerate { " (degenerate)" } else { "" }
                );
                // File names only: the summary must not depend on where the
                // output directory lives.
                summaries.push(EmbedRunSummary {
                    seed,
                    metric_mean: report.mean_abs_error,
                    metric_std: report.std_abs_error,
                    degenerate: report.degenerate,
                    checkpoint: format!("model_seed{seed}.json"),
                    log: format!("log_seed{seed}.csv"),
                });
                outputs.push(ckpt_path.display().to_string());
                outputs.push(log_path.display().to_string());
                runs.push(run);
            }
            Err(e) => {
                println!("  seed {seed}: FAILED ({e})");
                failed.push((seed, e.to_string()));
            }
        }
    }

    let best = select_best_seed(&runs)?;
    let best_path = args.out.join("best.json");
    Checkpoint {
        model: best.model.clone(),
        config: TrainConfig {
            seed: best.seed,
            ..cfg.train_config()
        },
        seed: best.seed,
    }
    .save(&best_path)?;
    println!(
        "train-embed: best seed {} (metric mean {:.4}) -> {}",
        best.seed,
        best.log.final_report.mean_abs_error,
        best_path.display()
    );
    outputs.push(best_path.display().to_string());

    write_json(
        &args.out.join("summary.json"),
        &EmbedSummary {
            runs: summaries,
            failed,
            best_seed: best.seed,
            best_checkpoint: "best.json".into(),
        },
    )?;
    write_manifest(
        &args.out,
        &RunManifest {
            command: "train-embed",
            config: serde_json::to_value(&cfg)?,
            seeds,
            inputs: digest_inputs(&[&args.demos])?,
            outputs,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
    )
}

// ---------------------------------------------------------------------------
// eval-embed

#[derive(Args, Debug)]
pub struct EvalEmbedArgs {
    /// Embedding checkpoint (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Trajectory file to score against (held-out demos).
    #[arg(long)]
    pub demos: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn eval_embed(args: EvalEmbedArgs) -> Result<()> {
    let started = Instant::now();
    require_input(&args.model, "model checkpoint")?;
    require_input(&args.demos, "demos file")?;
    let ckpt = Checkpoint::load(&args.model)?;
    let trajs = load_trajectories(&args.demos)?;
    let report = eval_metric(&ckpt.model, &trajs)?;

    fs::create_dir_all(&args.out)?;
    write_json(&args.out.join("eval.json"), &report)?;
    let mut csv = String::from("trajectory,distance,normalized_length,abs_error\n");
    for (i, (d, y)) in report
        .distances
        .iter()
        .zip(&report.normalized_lengths)
        .enumerate()
    {
        let err = (y - report.scale * d).abs();
        csv.push_str(&format!("{i},{d},{y},{err}\n"));
    }
    fs::write(args.out.join("eval.csv"), csv)?;
    println!(
        "eval-embed: {} trajectories, scale {:.4}, abs error mean {:.4} std {:.4}{}",
        trajs.len(),
        report.scale,
        report.mean_abs_error,
        report.std_abs_error,
        if report.degenerate { " (DEGENERATE)" } else { "" }
    );

    write_manifest(
        &args.out,
        &RunManifest {
            command: "eval-embed",
            config: serde_json::Value::Null,
            seeds: vec![ckpt.seed],
            inputs: digest_inputs(&[&args.model, &args.demos])?,
            outputs: vec![
                args.out.join("eval.json").display().to_string(),
                args.out.join("eval.csv").display().to_string(),
            ],
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
    )
}

// ---------------------------------------------------------------------------
// train-rl

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainRlConfig {
    pub env: String,
    pub mode: String,
    /// Embedding checkpoint path (needed by embedded/augmented modes).
    pub embedding: Option<String>,
    pub discount: f64,
    pub episodes_per_update: usize,
    pub updates: usize,
    pub policy_lr: f64,
    pub value_lr: f64,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    pub seed: u64,
    pub smooth_window: usize,
    pub seeds: usize,
}

impl Default for TrainRlConfig {
    fn default() -> Self {
        let r = RLConfig::default();
        Self {
            env: "cartpole-swingup".into(),
            mode: "raw".into(),
            embedding: None,
            discount: r.discount,
            episodes_per_update: r.episodes_per_update,
            updates: r.updates,
            policy_lr: r.policy_lr,
            value_lr: r.value_lr,
            hidden: r.hidden,
            init_log_std: r.init_log_std,
            seed: r.seed,
            smooth_window: r.smooth_window,
            seeds: 5,
        }
    }
}

impl TrainRlConfig {
    fn rl_config(&self) -> RLConfig {
        RLConfig {
            discount: self.discount,
            episodes_per_update: self.episodes_per_update,
            updates: self.updates,
            policy_lr: self.policy_lr,
            value_lr: self.value_lr,
            hidden: self.hidden.clone(),
            init_log_std: self.init_log_std,
            seed: self.seed,
            smooth_window: self.smooth_window,
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainRlArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub env: Option<String>,
    /// Observation mode: raw, trig, embedded, or augmented.
    #[arg(long)]
    pub mode: Option<String>,
    /// Embedding checkpoint (for embedded/augmented modes).
    #[arg(long)]
    pub embedding: Option<PathBuf>,
    #[arg(long)]
    pub discount: Option<f64>,
    #[arg(long)]
    pub episodes_per_update: Option<usize>,
    #[arg(long)]
    pub updates: Option<usize>,
    #[arg(long)]
    pub policy_lr: Option<f64>,
    #[arg(long)]
    pub value_lr: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub init_log_std: Option<f64>,
    /// Base seed; runs use seed, seed+1, ...
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub smooth_window: Option<usize>,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct RlSummary {
    env: String,
    mode: String,
    embedding: Option<String>,
    seeds: Vec<u64>,
    failed: Vec<(u64, String)>,
    final_smoothed: Vec<f64>,
    final_variance: f64,
    best_seed: u64,
    mean_final: f64,
    do_nothing_band_upper: f64,
    seeds_above_band: usize,
}

fn train_rl(args: TrainRlArgs) -> Result<()> {
    let started = Instant::now();
    let mut cfg: TrainRlConfig = load_config(args.config.as_deref())?;
    if let Some(v) = args.env {
        cfg.env = v;
    }
    if let Some(v) = args.mode {
        cfg.mode = v;
    }
    if let Some(v) = args.embedding {
        cfg.embedding = Some(v.display().to_string());
    }
    if let Some(v) = args.discount {
        cfg.discount = v;
    }
    if let Some(v) = args.episodes_per_update {
        cfg.episodes_per_update = v;
    }
    if let Some(v) = args.updates {
        cfg.updates = v;
    }
    if let Some(v) = args.policy_lr {
        cfg.policy_lr = v;
    }
    if let Some(v) = args.value_lr {
        cfg.value_lr = v;
    }
    if let Some(v) = args.hidden {
        cfg.hidden = v;
    }
    if let Some(v) = args.init_log_std {
        cfg.init_log_std = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.smooth_window {
        cfg.smooth_window = v;
    }
    if let Some(v) = args.seeds {
        cfg.seeds = v;
    }

    let task = Task::from_id(&cfg.env)?;
    let mode = ObsMode::from_id(&cfg.mode)?;
    let model = match (&cfg.embedding, mode.needs_model()) {
        (Some(path), _) => {
            let path = PathBuf::from(path);
            require_input(&path, "embedding checkpoint")?;
            Some(Checkpoint::load(&path)?.model)
        }
        (None, true) => {
            return Err(Error::Config(format!(
                "mode '{}' requires --embedding",
                cfg.mode
            )))
        }
        (None, false) => None,
    };

    let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|k| cfg.seed + k).collect();
    println!(
        "train-rl: {} / {} over seeds {:?} ({} updates x {} episodes)",
        cfg.env, cfg.mode, seeds, cfg.updates, cfg.episodes_per_update
    );
    let report = seed_sweep(
        || TaskEnv::new(task, mode, model.clone()),
        &cfg.rl_config(),
        &seeds,
    )?;

    fs::create_dir_all(&args.out)?;
    let mut outputs = Vec::new();
    for curve in &report.curves {
        let path = args.out.join(format!("curve_seed{}.csv", curve.seed));
        curve.write_csv(&path)?;
        outputs.push(path.display().to_string());
    }
    let sweep_path = args.out.join("sweep.csv");
    report.write_csv(&sweep_path)?;
    outputs.push(sweep_path.display().to_string());

    let band = do_nothing_band_upper(task.spec().horizon);
    let above = report.final_smoothed.iter().filter(|&&v| v > band).count();
    for (seed, final_val) in report.curves.iter().map(|c| (c.seed, c.final_smoothed())) {
        println!("  seed {seed}: final smoothed return {final_val:.2}");
    }
    println!(
        "train-rl: mean final {:.2}, variance {:.2}, {}/{} seeds above do-nothing band ({:.0})",
        crate::report::mean(&report.final_smoothed),
        report.final_variance,
        above,
        report.curves.len(),
        band
    );

    write_json(
        &args.out.join("summary.json"),
        &RlSummary {
            env: cfg.env.clone(),
            mode: cfg.mode.clone(),
            embedding: cfg.embedding.clone(),
            seeds: seeds.clone(),
            failed: report.failed.clone(),
            final_smoothed: report.final_smoothed.clone(),
            final_variance: report.final_variance,
            best_seed: report.best_seed,
            mean_final: crate::report::mean(&report.final_smoothed),
            do_nothing_band_upper: band,
            seeds_above_band: above,
        },
    )?;
    outputs.push(args.out.join("summary.json").display().to_string());

    let embedding_path = cfg.embedding.as_ref().map(PathBuf::from);
    let mut inputs: Vec<&Path> = Vec::new();
    if let Some(p) = &embedding_path {
        inputs.push(p);
    }
    write_manifest(
        &args.out,
        &RunManifest {
            command: "train-rl",
            config: serde_json::to_value(&cfg)?,
            seeds,
            inputs: digest_inputs(&inputs)?,
            outputs,
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
    )
}

// ---------------------------------------------------------------------------
// compare

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Sweep output directories (each holding summary.json + sweep.csv).
    #[arg(required = true)]
    pub sweeps: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Deserialize)]
struct RlSummaryIn {
    env: String,
    mode: String,
    final_variance: f64,
    mean_final: f64,
    final_smoothed: Vec<f64>,
}

fn compare(args: CompareArgs) -> Result<()> {
    let started = Instant::now();
    let mut rows = Vec::new();
    for dir in &args.sweeps {
        let summary_path = dir.join("summary.json");
        let sweep_path = dir.join("sweep.csv");
        require_input(&summary_path, "sweep summary")?;
        require_input(&sweep_path, "sweep csv")?;
        let summary: RlSummaryIn = serde_json::from_str(&fs::read_to_string(&summary_path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", summary_path.display())))?;

        // Final band and the best-ever value come from the sweep curve.
        let text = fs::read_to_string(&sweep_path)?;
        let mut band_low = f64::NAN;
        let mut band_high = f64::NAN;
        let mut best_ever = f64::NEG_INFINITY;
        for line in text.lines().skip(1) {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 5 {
                return Err(Error::Record {
                    index: 0,
                    reason: format!("malformed sweep row in {}", sweep_path.display()),
                });
            }
            band_low = cells[2].parse().unwrap_or(f64::NAN);
            band_high = cells[3].parse().unwrap_or(f64::NAN);
            let best: f64 = cells[4].parse().unwrap_or(f64::NAN);
            if best > best_ever {
                best_ever = best;
            }
        }
        rows.push((
            format!("{}/{}", summary.env, summary.mode),
            summary.mean_final,
            band_low,
            band_high,
            best_ever,
            summary.final_variance,
            summary.final_smoothed.len(),
        ));
    }

    fs::create_dir_all(&args.out)?;
    let mut csv =
        String::from("config,mean_final,band_low,band_high,best_ever,final_variance,seeds\n");
    println!(
        "{:<28} {:>10} {:>10} {:>10} {:>10} {:>12} {:>6}",
        "config", "mean", "band_low", "band_high", "best", "variance", "seeds"
    );
    for (label, mean_final, lo, hi, best, var, n) in &rows {
        csv.push_str(&format!(
            "{label},{mean_final},{lo},{hi},{best},{var},{n}\n"
        ));
        println!(
            "{label:<28} {mean_final:>10.2} {lo:>10.2} {hi:>10.2} {best:>10.2} {var:>12.2} {n:>6}"
        );
    }
    fs::write(args.out.join("compare.csv"), csv)?;

    let inputs: Vec<PathBuf> = args
        .sweeps
        .iter()
        .flat_map(|d| [d.join("summary.json"), d.join("sweep.csv")])
        .collect();
    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    write_manifest(
        &args.out,
        &RunManifest {
            command: "compare",
            config: serde_json::Value::Null,
            seeds: vec![],
            inputs: digest_inputs(&input_refs)?,
            outputs: vec![args.out.join("compare.csv").display().to_string()],
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
    )
}
