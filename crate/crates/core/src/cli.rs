//! The `floral` command line.

use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{FloralError, Result};
use crate::flow::FlowMode;
use crate::io::dataset::{write_field, write_manifest, FieldRole, GeneratedInfo, DATASET_FORMAT, GENERATED, SCHEMA_VERSION};
use crate::io::{read_dataset, read_manifest, write_dataset, DatasetManifest, RunConfig};
use crate::pde::{generate_dataset, ProblemKind, Sample};
use crate::train::{evaluate, generate_for_samples, train, write_outcome, Checkpoint, EvalReport, Predictor, SampleOptions};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA_GEN: i32 = 3;
pub const EXIT_TRAINING: i32 = 4;
pub const EXIT_SAMPLING: i32 = 5;

#[derive(Parser, Debug)]
#[command(name = "floral", version, about = "Multi-fidelity probabilistic neural operators by conditional flow matching")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a multi-fidelity dataset.
    GenData(GenDataArgs),
    /// Train a FLORA or FLORAL vector field.
    Train(TrainArgs),
    /// Generate ensembles for selected dataset samples.
    Sample(SampleArgs),
    /// Score ensembles against the high-fidelity solutions of a dataset.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    #[arg(long)]
    pub problem: String,
    /// Preset name or configuration file; its `problem` section is used.
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// flora or floral.
    #[arg(long)]
    pub mode: String,
    /// Preset name or configuration file; its `train` section is used.
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Checkpoint header, or `oracle` / `lf-baseline`.
    #[arg(long)]
    pub ckpt: String,
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated indices and ranges such as `0,3,5-9`; all samples by default.
    #[arg(long)]
    pub indices: Option<String>,
    #[arg(long, default_value_t = 10)]
    pub ensembles: usize,
    /// Output grid such as `128` or `128,128`; the HF grid by default.
    #[arg(long)]
    pub resolution: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Checkpoint header, or `oracle` / `lf-baseline`.
    #[arg(long)]
    pub ckpt: String,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub ensembles: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub indices: Option<String>,
    /// Appends `label,train_size,mean_l2_error,mean_predictive_std` to this CSV.
    #[arg(long)]
    pub pareto: Option<PathBuf>,
}

/// Exit code for an error raised by a command whose own failures map to `stage`.
pub fn exit_code(e: &FloralError, stage: i32) -> i32 {
    match e {
        FloralError::Config(_) | FloralError::Data(_) | FloralError::Json(_) => EXIT_CONFIG,
        FloralError::NonFiniteLoss { .. } => EXIT_TRAINING,
        FloralError::Member { .. } | FloralError::Integrator(_) => EXIT_SAMPLING,
        FloralError::Sample { source, .. } => exit_code(source, stage),
        _ => stage,
    }
}

pub fn parse_indices(spec: &str, count: usize) -> Result<Vec<usize>> {
    let bad = || FloralError::Config(format!("invalid index list '{spec}'"));
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
            None => {
                let i: usize = part.parse().map_err(|_| bad())?;
                (i, i)
            }
        };
        if lo > hi {
            return Err(bad());
        }
        out.extend(lo..=hi);
    }
    if out.is_empty() {
        return Err(bad());
    }
    if let Some(&i) = out.iter().find(|&&i| i >= count) {
        return Err(FloralError::Config(format!("index {i} out of range for {count} samples")));
    }
    Ok(out)
}

pub fn parse_resolution(spec: &str) -> Result<Vec<usize>> {
    let r: Vec<usize> = spec
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| FloralError::Config(format!("invalid resolution '{spec}'")))?;
    if r.is_empty() || r.iter().any(|&n| n < 2) {
        return Err(FloralError::Config(format!("resolution needs entries of at least 2, got '{spec}'")));
    }
    Ok(r)
}

fn load_predictor(spec: &str) -> Result<(Predictor, Option<Checkpoint>)> {
    match spec {
        "oracle" => Ok((Predictor::Oracle, None)),
        "lf-baseline" => Ok((Predictor::LfBaseline, None)),
        path => {
            let ck = Checkpoint::load(Path::new(path))?;
            Ok((Predictor::from_checkpoint(ck.clone())?, Some(ck)))
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn to_json(v: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

pub fn cmd_gen_data(a: &GenDataArgs) -> Result<DatasetManifest> {
    let kind = ProblemKind::parse(&a.problem)?;
    let cfg = match &a.config {
        Some(c) => RunConfig::load(c)?,
        None => RunConfig::defaults(kind),
    };
    if cfg.problem.problem != kind {
        return Err(FloralError::Config(format!(
            "--problem {} conflicts with a {} configuration",
            kind.name(),
            cfg.problem.problem.name()
        )));
    }
    if a.count == 0 {
        return Err(FloralError::Config("--count must be positive".into()));
    }
    let data = generate_dataset(&cfg.problem, a.count, a.seed)?;
    write_dataset(&a.out, &data)
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let data = read_dataset(&a.data)?;
    let mut cfg = match &a.config {
        Some(c) => RunConfig::load(c)?,
        None => RunConfig::defaults(data.config.problem),
    };
    cfg.train.mode = FlowMode::parse(&a.mode)?;
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    if cfg.train.modes_per_axis.len() != data.config.resolution.len() {
        return Err(FloralError::Config(format!(
            "modes_per_axis {:?} does not fit a {}-d dataset",
            cfg.train.modes_per_axis,
            data.config.resolution.len()
        )));
    }
    cfg.problem = data.config.clone();
    if cfg.train.mode == FlowMode::Floral && !data.has_lf() {
        return Err(FloralError::Config("--mode floral needs a dataset with lf_solution fields".into()));
    }
    let outcome = train(&data.samples, &cfg.train)?;
    write_outcome(&outcome, &a.out)?;
    write_text(&a.out.join("config.json"), &cfg.to_json()?)
}

fn selected<'a>(samples: &'a [Sample], indices: &Option<String>) -> Result<Vec<(usize, &'a Sample)>> {
    let idx = match indices {
        Some(s) => parse_indices(s, samples.len())?,
        None => (0..samples.len()).collect(),
    };
    Ok(idx.into_iter().map(|i| (i, &samples[i])).collect())
}

pub fn cmd_sample(a: &SampleArgs) -> Result<DatasetManifest> {
    let (pred, ck) = load_predictor(&a.ckpt)?;
    let data = read_dataset(&a.data)?;
    let chosen = selected(&data.samples, &a.indices)?;
    let resolution = a.resolution.as_deref().map(parse_resolution).transpose()?;
    let opts = SampleOptions { ensembles: a.ensembles, seed: a.seed, resolution, ..SampleOptions::default() };
    let ensembles = generate_for_samples(&pred, &chosen, &opts)?;
    fs::create_dir_all(&a.out)?;
    let records: Vec<_> = ensembles.iter().flatten().collect();
    let field = write_field(&a.out, GENERATED, FieldRole::HfSolution, &records)?;
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        version: SCHEMA_VERSION,
        problem: data.config.problem,
        count: records.len(),
        seed: a.seed,
        config: data.config.clone(),
        fields: vec![field],
        generated: Some(GeneratedInfo {
            checkpoint: a.ckpt.clone(),
            mode: ck.and_then(|c| c.header.mode).map(|m| m.name().to_string()),
            source_indices: chosen.iter().map(|(i, _)| *i).collect(),
            ensembles: a.ensembles,
            seed: a.seed,
        }),
    };
    write_manifest(&a.out, &manifest)?;
    read_manifest(&a.out)
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    format: &'a str,
    version: u32,
    checkpoint: &'a str,
    mode: Option<&'a str>,
    data: String,
    count: usize,
    ensembles: usize,
    seed: u64,
    rmse: f64,
    nrmse: f64,
    crmse: f64,
    mean_l2_error: f64,
    mean_predictive_std: f64,
    metrics_file: &'a str,
}

pub fn cmd_eval(a: &EvalArgs) -> Result<EvalReport> {
    let (pred, ck) = load_predictor(&a.ckpt)?;
    let data = read_dataset(&a.data)?;
    let chosen = selected(&data.samples, &a.indices)?;
    let opts = SampleOptions { ensembles: a.ensembles, seed: a.seed, ..SampleOptions::default() };
    let report = evaluate(&pred, &chosen, &opts)?;
    fs::create_dir_all(&a.out)?;
    write_text(&a.out.join("metrics.csv"), &report.to_csv())?;
    let mode = ck.as_ref().and_then(|c| c.header.mode).map(FlowMode::name);
    let summary = EvalSummary {
        format: "floral-eval",
        version: 1,
        checkpoint: &a.ckpt,
        mode,
        data: a.data.display().to_string(),
        count: chosen.len(),
        ensembles: a.ensembles,
        seed: a.seed,
        rmse: report.rmse,
        nrmse: report.nrmse,
        crmse: report.crmse,
        mean_l2_error: report.mean_l2_error,
        mean_predictive_std: report.mean_predictive_std,
        metrics_file: "metrics.csv",
    };
    write_text(&a.out.join("summary.json"), &to_json(&summary)?)?;
    if let Some(p) = &a.pareto {
        let label = mode.unwrap_or(&a.ckpt);
        let train_size = ck.as_ref().and_then(|c| c.header.train.as_ref()).map_or(0, |t| t.train_size);
        let fresh = !p.exists();
        let mut f = OpenOptions::new().create(true).append(true).open(p)?;
        if fresh {
            writeln!(f, "label,train_size,mean_l2_error,mean_predictive_std")?;
        }
        writeln!(f, "{label},{train_size},{},{}", report.mean_l2_error, report.mean_predictive_std)?;
    }
    Ok(report)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("FLORAL_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| FloralError::Config(format!("FLORAL_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| FloralError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    let (result, stage) = match &cli.command {
        Command::GenData(a) => (cmd_gen_data(a).map(|m| {
            println!("wrote {} samples to {}", m.count, a.out.display());
        }), EXIT_DATA_GEN),
        Command::Train(a) => (cmd_train(a).map(|()| {
            println!("wrote checkpoints to {}", a.out.display());
        }), EXIT_TRAINING),
        Command::Sample(a) => (cmd_sample(a).map(|m| {
            println!("wrote {} ensemble members to {}", m.count, a.out.display());
        }), EXIT_SAMPLING),
        Command::Eval(a) => (cmd_eval(a).map(|r| {
            println!(
                "rmse {:.6e} nrmse {:.6e} crmse {:.6e} mean_l2_error {:.6e} mean_predictive_std {:.6e}",
                r.rmse, r.nrmse, r.crmse, r.mean_l2_error, r.mean_predictive_std
            );
        }), EXIT_SAMPLING),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e, stage)
        }
    }
}

pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    run(Cli::parse())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_lists() {
        assert_eq!(parse_indices("0,3,5-7", 10).unwrap(), vec![0, 3, 5, 6, 7]);
        assert!(parse_indices("9-3", 10).is_err());
        assert!(parse_indices("10", 10).is_err());
        assert!(parse_indices("x", 10).is_err());
    }

    #[test]
    fn resolutions() {
        assert_eq!(parse_resolution("128,64").unwrap(), vec![128, 64]);
        assert!(parse_resolution("1").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&FloralError::Config("x".into()), EXIT_TRAINING), EXIT_CONFIG);
        assert_eq!(exit_code(&FloralError::NonFiniteLoss { epoch: 0, batch: 0 }, EXIT_TRAINING), EXIT_TRAINING);
        let solver = FloralError::Sample { index: 3, source: Box::new(FloralError::Solver("x".into())) };
        assert_eq!(exit_code(&solver, EXIT_DATA_GEN), EXIT_DATA_GEN);
        let member = FloralError::Member { member: 1, source: Box::new(FloralError::Integrator("x".into())) };
        assert_eq!(exit_code(&member, EXIT_SAMPLING), EXIT_SAMPLING);
    }
}
