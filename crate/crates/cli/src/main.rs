//! Command-line pipeline: generate a synthetic cohort, train the outcome
//! world model, simulate selection policies over the cohort, and benchmark
//! the bandit on a synthetic linear instance.
//!
//! Every subcommand requires an explicit --seed (no wall-clock default),
//! and identical (flags, input files, seed) produce byte-identical outputs.
//! A `manifest` file with the resolved flag values is written next to every
//! output set; outputs are staged in memory and a failed write removes
//! whatever was already written.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use curricula_core::data::{
    cohort_report_bytes, default_planted_weights, generate_synthetic, load_dataset,
    render_report_csv, synthetic_layout, world_model_bytes, Dataset, SyntheticConfig,
};
use curricula_core::domain::RewardConfig;
use curricula_core::features::FeatureLayout;
use curricula_core::policies::PolicyId;
use curricula_core::regret::{run_regret_bench, RegretBenchConfig};
use curricula_core::sim::{run_cohort, CohortReport, SimConfig};
use curricula_core::world::{cross_validate, predict_missing, train, Hyperparams};

#[derive(Parser)]
#[command(
    name = "curricula",
    version,
    about = "Curriculum sequencing pipeline: generate, train, simulate, compare, benchmark"
)]
struct Cli {
    /// Master seed; required by every subcommand (no wall-clock default).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; created if missing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort (attempts, catalog, units).
    GenData(GenDataArgs),
    /// Train the outcome world model and cross-validate it.
    TrainWorldModel(TrainArgs),
    /// Simulate one policy over the cohort.
    Simulate(SimulateArgs),
    /// Simulate several policies and merge their reports.
    Compare(CompareArgs),
    /// Cumulative-regret benchmark on a synthetic linear bandit.
    BenchRegret(BenchArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    students: usize,
    #[arg(long)]
    units: usize,
    #[arg(long = "exercises-per-unit")]
    exercises_per_unit: usize,
    /// Min distinct exercises a student attempts per started unit.
    #[arg(long = "min-attempts")]
    min_attempts: Option<usize>,
    /// Max distinct exercises a student attempts per started unit.
    #[arg(long = "max-attempts")]
    max_attempts: Option<usize>,
    /// Probability a student starts any given unit.
    #[arg(long, default_value_t = 1.0)]
    participation: f64,
    /// Probability an observed attempt is an MCQ.
    #[arg(long = "mcq-rate", default_value_t = 0.15)]
    mcq_rate: f64,
    /// Draw outcomes from a fixed prior instead of the planted model.
    #[arg(long)]
    unplanted: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory holding attempts.jsonl, catalog.jsonl, units.jsonl.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 1e-3)]
    l2: f64,
    #[arg(long = "learning-rate", default_value_t = 0.5)]
    learning_rate: f64,
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    data: PathBuf,
    /// World-model checkpoint; required when any (student, exercise) pair
    /// must be sampled rather than replayed.
    #[arg(long)]
    model: Option<PathBuf>,
    /// One of: random, heuristic, linucb.
    #[arg(long)]
    policy: String,
    #[arg(long, default_value_t = 20)]
    runs: u32,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long = "mcq-penalty", default_value_t = 0.4)]
    mcq_penalty: f64,
    /// Base rewards: instant-success,eventual-success,eventual-failure,skip.
    #[arg(long, default_value = "1.5,1.0,0.5,0.0")]
    rewards: String,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Comma-separated policy ids, e.g. random,heuristic,linucb.
    #[arg(long, default_value = "random,heuristic,linucb")]
    policies: String,
    #[arg(long, default_value_t = 20)]
    runs: u32,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long = "mcq-penalty", default_value_t = 0.4)]
    mcq_penalty: f64,
    #[arg(long, default_value = "1.5,1.0,0.5,0.0")]
    rewards: String,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 8)]
    d: usize,
    #[arg(long, default_value_t = 20)]
    arms: usize,
    #[arg(long, default_value_t = 10_000)]
    horizon: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
}

/// A staged output set: files are rendered in memory first and written as
/// the final step; a failed write removes everything already written so a
/// failed invocation leaves no partial outputs.
struct OutputSet {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn file_names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    fn finish(mut self, mut manifest: Manifest) -> Result<()> {
        manifest.outputs = self.file_names();
        manifest.outputs.push("manifest".into());
        self.add("manifest", manifest.render());

        std::fs::create_dir_all(&self.dir)
            .with_context(|| format!("creating output directory {}", self.dir.display()))?;
        let mut written: Vec<PathBuf> = Vec::new();
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            if let Err(e) = std::fs::write(&path, bytes) {
                for p in &written {
                    let _ = std::fs::remove_file(p);
                }
                let _ = std::fs::remove_file(&path);
                return Err(e).with_context(|| format!("writing {}", path.display()));
            }
            written.push(path);
        }
        Ok(())
    }
}

/// Written alongside every output set so any artifact can be reproduced
/// from its manifest alone.
#[derive(serde::Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    seed: u64,
    out: String,
    flags: BTreeMap<String, serde_json::Value>,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl Manifest {
    fn new(subcommand: &'static str, seed: u64, out: &Path) -> Self {
        Self {
            tool: "curricula",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            seed,
            out: out.display().to_string(),
            flags: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn flag(&mut self, name: &str, value: impl Into<serde_json::Value>) {
        self.flags.insert(name.to_string(), value.into());
    }

    fn input(&mut self, path: impl AsRef<Path>) {
        self.inputs.push(path.as_ref().display().to_string());
    }

    fn render(&self) -> Vec<u8> {
        let mut body = serde_json::to_string_pretty(self).expect("manifest serialization");
        body.push('\n');
        body.into_bytes()
    }
}

fn parse_rewards(spec: &str, mcq_penalty: f64) -> Result<RewardConfig> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 4 {
        bail!("--rewards expects 4 comma-separated values, got {spec:?}");
    }
    let mut values = [0.0f64; 4];
    for (v, raw) in values.iter_mut().zip(&parts) {
        *v = raw
            .trim()
            .parse()
            .with_context(|| format!("invalid reward value {raw:?}"))?;
    }
    let cfg = RewardConfig {
        reward_instant_success: values[0],
        reward_eventual_success: values[1],
        reward_eventual_failure: values[2],
        reward_skip: values[3],
        mcq_penalty,
    };
    if !cfg.is_finite() {
        bail!("reward values must be finite");
    }
    Ok(cfg)
}

fn parse_policies(spec: &str) -> Result<Vec<PolicyId>> {
    let mut out = Vec::new();
    for part in spec.split(',') {
        let id: PolicyId = part.trim().parse()?;
        if out.contains(&id) {
            bail!("policy {id} listed twice");
        }
        out.push(id);
    }
    Ok(out)
}

fn load_data_dir(dir: &Path) -> Result<Dataset> {
    Ok(load_dataset(
        &dir.join("attempts.jsonl"),
        &dir.join("catalog.jsonl"),
        &dir.join("units.jsonl"),
    )?)
}

fn jsonl<T: serde::Serialize>(records: impl Iterator<Item = T>) -> Vec<u8> {
    let mut buf = String::new();
    for record in records {
        buf.push_str(&serde_json::to_string(&record).expect("record serialization"));
        buf.push('\n');
    }
    buf.into_bytes()
}

fn cmd_gen_data(args: &GenDataArgs, seed: u64, out: &Path) -> Result<()> {
    let mut cfg = SyntheticConfig::new(args.students, args.units, args.exercises_per_unit, seed);
    if let Some(min) = args.min_attempts {
        cfg.min_attempts_per_unit = min;
    }
    if let Some(max) = args.max_attempts {
        cfg.max_attempts_per_unit = max;
    }
    cfg.unit_participation = args.participation;
    cfg.mcq_rate = args.mcq_rate;
    if !args.unplanted {
        cfg.planted_weights = Some(default_planted_weights(&synthetic_layout()));
    }
    let dataset = generate_synthetic(&cfg)?;

    let mut outputs = OutputSet::new(out);
    outputs.add("attempts.jsonl", jsonl(dataset.attempts().iter()));
    outputs.add("catalog.jsonl", jsonl(dataset.catalog().values()));
    outputs.add("units.jsonl", jsonl(dataset.units().values()));

    let mut manifest = Manifest::new("gen-data", seed, out);
    manifest.flag("students", args.students);
    manifest.flag("units", args.units);
    manifest.flag("exercises_per_unit", args.exercises_per_unit);
    manifest.flag("min_attempts", cfg.min_attempts_per_unit);
    manifest.flag("max_attempts", cfg.max_attempts_per_unit);
    manifest.flag("participation", args.participation);
    manifest.flag("mcq_rate", args.mcq_rate);
    manifest.flag("planted", !args.unplanted);
    outputs.finish(manifest)
}

#[derive(serde::Serialize)]
struct CvReportDoc {
    version: u32,
    kind: &'static str,
    folds: usize,
    accuracy: f64,
    majority_baseline: f64,
    per_fold: Vec<curricula_core::world::FoldReport>,
    training_attempts: usize,
    prediction_table_entries: usize,
}

fn cmd_train(args: &TrainArgs, seed: u64, out: &Path) -> Result<()> {
    if args.folds < 2 {
        bail!("--folds must be at least 2, got {}", args.folds);
    }
    let dataset = load_data_dir(&args.data)?;
    let layout = FeatureLayout::from_catalog(dataset.catalog().values());
    let hyper = Hyperparams {
        l2: args.l2,
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        seed,
    };
    let cv = cross_validate(&dataset, &layout, hyper, args.folds)?;
    let model = train(&dataset, &layout, hyper)?;
    let table = predict_missing(&model, &dataset)?;

    let cv_doc = CvReportDoc {
        version: 1,
        kind: "cv_report",
        folds: cv.folds,
        accuracy: cv.accuracy,
        majority_baseline: cv.majority_baseline,
        per_fold: cv.per_fold,
        training_attempts: dataset.attempts().len(),
        prediction_table_entries: table.len(),
    };
    let mut cv_body = serde_json::to_string_pretty(&cv_doc).expect("cv report serialization");
    cv_body.push('\n');

    let mut outputs = OutputSet::new(out);
    outputs.add("model.json", world_model_bytes(&model));
    outputs.add("cv_report.json", cv_body.into_bytes());

    let mut manifest = Manifest::new("train-world-model", seed, out);
    manifest.flag("data", args.data.display().to_string());
    manifest.flag("folds", args.folds);
    manifest.flag("l2", args.l2);
    manifest.flag("learning_rate", args.learning_rate);
    manifest.flag("epochs", args.epochs);
    manifest.input(args.data.join("attempts.jsonl"));
    manifest.input(args.data.join("catalog.jsonl"));
    manifest.input(args.data.join("units.jsonl"));
    outputs.finish(manifest)
}

#[allow(clippy::too_many_arguments)]
fn simulate_like(
    subcommand: &'static str,
    data: &Path,
    model_path: Option<&PathBuf>,
    policies: &[PolicyId],
    runs: u32,
    alpha: f64,
    lambda: f64,
    mcq_penalty: f64,
    rewards: &str,
    seed: u64,
    out: &Path,
) -> Result<()> {
    if policies.is_empty() {
        bail!("no policies given");
    }
    let reward_cfg = parse_rewards(rewards, mcq_penalty)?;
    let dataset = load_data_dir(data)?;
    let model = model_path
        .map(|p| curricula_core::data::load_world_model(p))
        .transpose()?;

    let mut reports: Vec<CohortReport> = Vec::with_capacity(policies.len());
    for &policy in policies {
        let cfg = SimConfig {
            policy,
            runs,
            master_seed: seed,
            alpha,
            lambda,
            reward_cfg,
        };
        reports.push(run_cohort(&dataset, model.as_ref(), &cfg)?);
    }

    let mut outputs = OutputSet::new(out);
    outputs.add("report.csv", render_report_csv(&reports).into_bytes());
    outputs.add("report.json", cohort_report_bytes(&reports));

    let mut manifest = Manifest::new(subcommand, seed, out);
    manifest.flag("data", data.display().to_string());
    if let Some(p) = model_path {
        manifest.flag("model", p.display().to_string());
    }
    manifest.flag(
        "policies",
        policies
            .iter()
            .map(|p| p.as_str())
            .collect::<Vec<_>>()
            .join(","),
    );
    manifest.flag("runs", runs);
    manifest.flag("alpha", alpha);
    manifest.flag("lambda", lambda);
    manifest.flag("mcq_penalty", mcq_penalty);
    manifest.flag("rewards", rewards);
    manifest.input(data.join("attempts.jsonl"));
    manifest.input(data.join("catalog.jsonl"));
    manifest.input(data.join("units.jsonl"));
    if let Some(p) = model_path {
        manifest.input(p);
    }
    outputs.finish(manifest)
}

fn cmd_bench(args: &BenchArgs, seed: u64, out: &Path) -> Result<()> {
    let cfg = RegretBenchConfig {
        d: args.d,
        arms: args.arms,
        horizon: args.horizon,
        noise: args.noise,
        alpha: args.alpha,
        lambda: args.lambda,
        seed,
    };
    let result = run_regret_bench(&cfg)?;

    let mut csv = String::from("t,cumulative_regret\n");
    for (t, regret) in result.linucb_cumulative.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", t + 1, regret));
    }

    let mut outputs = OutputSet::new(out);
    outputs.add("regret.csv", csv.into_bytes());

    let mut manifest = Manifest::new("bench-regret", seed, out);
    manifest.flag("d", args.d);
    manifest.flag("arms", args.arms);
    manifest.flag("horizon", args.horizon);
    manifest.flag("noise", args.noise);
    manifest.flag("alpha", args.alpha);
    manifest.flag("lambda", args.lambda);
    outputs.finish(manifest)
}

fn run(cli: &Cli) -> Result<()> {
    let seed = cli
        .seed
        .context("--seed is required (stochastic commands take no wall-clock default)")?;
    let out = cli.out.as_deref().context("--out is required")?;
    match &cli.command {
        Command::GenData(args) => cmd_gen_data(args, seed, out),
        Command::TrainWorldModel(args) => cmd_train(args, seed, out),
        Command::Simulate(args) => {
            let policy: PolicyId = args.policy.parse()?;
            simulate_like(
                "simulate",
                &args.data,
                args.model.as_ref(),
                &[policy],
                args.runs,
                args.alpha,
                args.lambda,
                args.mcq_penalty,
                &args.rewards,
                seed,
                out,
            )
        }
        Command::Compare(args) => {
            let policies = parse_policies(&args.policies)?;
            simulate_like(
                "compare",
                &args.data,
                args.model.as_ref(),
                &policies,
                args.runs,
                args.alpha,
                args.lambda,
                args.mcq_penalty,
                &args.rewards,
                seed,
                out,
            )
        }
        Command::BenchRegret(args) => cmd_bench(args, seed, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
