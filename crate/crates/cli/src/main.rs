use std::fmt::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rlval_core::data::{write_yahoo_dir, CorpusSummary};
use rlval_core::labeling::{HumanOracle, LabelHub};
use rlval_core::trainer::{
    checkpoint_read, checkpoint_save, compare_strategies, evaluate, load_corpus, prepare_corpus, run_simulated,
    run_training, write_reports, CheckpointError, Confusion, EvalReport, OracleMode, PreparedCorpus, RunConfig,
    TrainError,
};

#[derive(Debug, Parser)]
#[command(name = "rlval", version, about = "Weakly supervised time-series anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train with the simulated oracle and evaluate on the test split.
    Train(Common),
    /// Evaluate a saved checkpoint on the test split.
    Eval(Common),
    /// Write a synthetic corpus in the Yahoo CSV format.
    Synth(Common),
    /// Train once per query strategy and tabulate the results.
    Compare(Common),
    /// Start the labeling service and train against a human oracle.
    Serve(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Checkpoint to write (train, serve) or read (eval).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) | TrainError::Checkpoint(CheckpointError::ManifestMismatch { .. }) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Config file first, overrides second, then `--seed`, then `RLVAL_SEED`
/// if nothing else set a seed.
fn resolve_config(c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::from_file(path).map_err(|e| Failure::Config(e.to_string()))?,
        None => RunConfig::default(),
    };
    for o in &c.overrides {
        cfg.apply_override(o).map_err(|e| Failure::Config(e.to_string()))?;
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
        cfg.seed_explicit = true;
    }
    if !cfg.seed_explicit {
        if let Ok(raw) = std::env::var("RLVAL_SEED") {
            cfg.seed = raw
                .trim()
                .parse()
                .map_err(|_| Failure::Config(format!("RLVAL_SEED `{raw}` is not an unsigned integer")))?;
        }
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(path) = &cfg.data_path {
        if !path.exists() {
            return Err(Failure::Config(format!("data_path {} does not exist", path.display())));
        }
    }
    println!("seed: {}", cfg.seed);
    Ok(cfg)
}

fn out_dir(c: &Common) -> PathBuf {
    c.out.clone().unwrap_or_else(|| PathBuf::from("rlval-out"))
}

fn corpus(cfg: &RunConfig) -> Result<PreparedCorpus, Failure> {
    let raw = load_corpus(cfg)?;
    let summary = CorpusSummary::of(&raw);
    println!(
        "corpus: {} series, {} points, {} anomalous points",
        summary.series, summary.points, summary.anomalies
    );
    Ok(prepare_corpus(&raw, cfg)?)
}

fn finish(cfg: &RunConfig, report: &EvalReport, dir: &Path) -> Result<(), Failure> {
    let paths = write_reports(dir, cfg, report).map_err(runtime)?;
    println!(
        "precision {:.4}  recall {:.4}  f1 {:.4}  labels used {}",
        report.precision, report.recall, report.f1, report.labels_used
    );
    println!("report: {}", paths.kv.display());
    println!("report: {}", paths.text.display());
    println!("report: {}", paths.episodes.display());
    Ok(())
}

fn train(c: &Common) -> Result<(), Failure> {
    let cfg = resolve_config(c)?;
    if cfg.oracle == OracleMode::Human {
        return Err(Failure::Config("oracle = human needs the `serve` subcommand".into()));
    }
    let corpus = corpus(&cfg)?;
    let outcome = run_simulated(&cfg, &corpus)?;
    if let Some(path) = &c.checkpoint {
        checkpoint_save(path, &outcome.agent.online, &outcome.vae, cfg.agent.input_mode).map_err(runtime)?;
        println!("checkpoint: {}", path.display());
    }
    finish(&cfg, &outcome.report, &out_dir(c))
}

fn eval(c: &Common) -> Result<(), Failure> {
    let cfg = resolve_config(c)?;
    let path = c
        .checkpoint
        .as_ref()
        .ok_or_else(|| Failure::Config("eval needs --checkpoint".into()))?;
    if !path.exists() {
        return Err(Failure::Config(format!("checkpoint {} does not exist", path.display())));
    }
    let ckpt = checkpoint_read(path).map_err(|e| Failure::Config(e.to_string()))?;
    let (net, vae) = ckpt
        .restore(cfg.agent.hidden, cfg.agent.input_mode, &cfg.vae_config())
        .map_err(|e| Failure::Config(e.to_string()))?;
    let corpus = corpus(&cfg)?;
    let confusion: Confusion = evaluate(&net, &vae, cfg.agent.input_mode, &corpus.test_flat())?;
    let report = EvalReport {
        seed: cfg.seed,
        episodes: 0,
        confusion,
        precision: confusion.precision(),
        recall: confusion.recall(),
        f1: confusion.f1(),
        initial_labels: 0,
        queries_answered: 0,
        queries_expired: 0,
        labels_used: 0,
        label_budget: 0,
        episode_series: Vec::new(),
        episode_rewards: Vec::new(),
        episode_steps: Vec::new(),
        episode_f1: Vec::new(),
        vae_anomalous_error: 0.0,
        vae_normal_error: 0.0,
    };
    finish(&cfg, &report, &out_dir(c))
}

fn synth(c: &Common) -> Result<(), Failure> {
    let mut cfg = resolve_config(c)?;
    cfg.source = rlval_core::trainer::DataSource::Synth;
    let series = load_corpus(&cfg)?;
    let dir = out_dir(c);
    let paths = write_yahoo_dir(&series, &dir).map_err(runtime)?;
    let s = CorpusSummary::of(&series);
    println!(
        "wrote {} files to {} ({} points, {} anomalous)",
        paths.len(),
        dir.display(),
        s.points,
        s.anomalies
    );
    Ok(())
}

fn compare(c: &Common) -> Result<(), Failure> {
    let cfg = resolve_config(c)?;
    let corpus = corpus(&cfg)?;
    let rows = compare_strategies(&cfg, &corpus)?;
    let mut table = String::from("strategy,precision,recall,f1,labels_used\n");
    for (s, r) in &rows {
        let _ = writeln!(table, "{},{},{},{},{}", s.name(), r.precision, r.recall, r.f1, r.labels_used);
    }
    println!("{:<17} {:>9} {:>9} {:>9} {:>7}", "strategy", "precision", "recall", "f1", "labels");
    for (s, r) in &rows {
        println!(
            "{:<17} {:>9.4} {:>9.4} {:>9.4} {:>7}",
            s.name(),
            r.precision,
            r.recall,
            r.f1,
            r.labels_used
        );
    }
    let dir = out_dir(c);
    std::fs::create_dir_all(&dir).map_err(runtime)?;
    let path = dir.join("compare.csv");
    std::fs::write(&path, table).map_err(runtime)?;
    println!("report: {}", path.display());
    Ok(())
}

fn serve(c: &Common) -> Result<(), Failure> {
    let mut cfg = resolve_config(c)?;
    cfg.oracle = OracleMode::Human;
    let addr: SocketAddr = cfg
        .bind
        .parse()
        .map_err(|_| Failure::Config(format!("bind `{}` is not a socket address", cfg.bind)))?;
    let corpus = corpus(&cfg)?;
    let hub = Arc::new(match &cfg.journal {
        Some(path) => LabelHub::with_journal(path).map_err(runtime)?,
        None => LabelHub::new(),
    });
    let local = rlval_service::spawn(addr, Arc::clone(&hub), cfg.static_dir.clone()).map_err(runtime)?;
    println!("listening on http://{local}");
    let mut oracle = HumanOracle::new(
        Arc::clone(&hub),
        &corpus.raw_train,
        cfg.window,
        Duration::from_secs(cfg.human_timeout_secs),
    );
    let outcome = run_training(&cfg, &corpus, &mut oracle)?;
    if let Some(path) = &c.checkpoint {
        checkpoint_save(path, &outcome.agent.online, &outcome.vae, cfg.agent.input_mode).map_err(runtime)?;
        println!("checkpoint: {}", path.display());
    }
    finish(&cfg, &outcome.report, &out_dir(c))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Train(c) => train(c),
        Command::Eval(c) => eval(c),
        Command::Synth(c) => synth(c),
        Command::Compare(c) => compare(c),
        Command::Serve(c) => serve(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
