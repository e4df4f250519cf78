//! `s2s`: runs one pipeline stage per invocation. Stages exchange files in a
//! working directory and each leaves a `run_<stage>.json` manifest behind.

mod config;
mod stages;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::RunConfig;
use stages::{Io, StageFiles};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, keys or values.
    Usage(String),
    /// Missing or malformed input, or an unwritable output.
    Data {
        stage: &'static str,
        path: PathBuf,
        cause: String,
    },
}

impl CliError {
    pub fn data(stage: &'static str, path: &Path, cause: impl ToString) -> Self {
        CliError::Data {
            stage,
            path: path.to_owned(),
            cause: cause.to_string(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "s2s", version, about = "Socioeconomic status estimation from smart-card records")]
struct Cli {
    /// Key-value config file applied before --set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Top-level seed for every stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 is the reference mode.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "s2s_out")]
    out: PathBuf,
    /// Input directory; defaults to --out.
    #[arg(long = "in", global = true)]
    input: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    stage: Stage,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Stage {
    /// Generate a synthetic city, population and record file.
    Synth {
        #[arg(long)]
        agents: Option<usize>,
        #[arg(long)]
        days: Option<u32>,
    },
    /// Parse records, reconstruct trips and keep frequent users.
    Ingest,
    /// Build the station context and assign SES labels.
    Label,
    /// Compute general and sequence features.
    Features,
    /// Train the classifier and write a checkpoint.
    Train,
    /// Score the checkpoint on the held-out split.
    Eval,
    /// Finite-difference check of the network gradients.
    Gradcheck,
    /// Summarize labels and evaluation.
    Report,
}

impl Stage {
    fn name(self) -> &'static str {
        match self {
            Stage::Synth { .. } => "synth",
            Stage::Ingest => "ingest",
            Stage::Label => "label",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Eval => "eval",
            Stage::Gradcheck => "gradcheck",
            Stage::Report => "report",
        }
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    stage: &'a str,
    version: &'a str,
    seed: u64,
    config_hash: String,
    /// Replaying these as `--set` reproduces the run.
    config: &'a std::collections::BTreeMap<String, String>,
    inputs: &'a [&'static str],
    outputs: &'a [&'static str],
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Stage::Gradcheck = cli.stage {
        // small enough to perturb every parameter in seconds
        for (k, v) in [("time_embed", "3"), ("lstm_hidden", "4"), ("seq_dense", "4"), ("general_hidden", "4"), ("fusion", "4")] {
            cfg.model.set(k, v).map_err(|e| CliError::Usage(e.to_string()))?;
        }
    }
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for kv in &cli.sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Stage::Synth { agents, days } = cli.stage {
        if let Some(a) = agents {
            cfg.set("agents", &a.to_string())?;
        }
        if let Some(d) = days {
            cfg.set("days", &d.to_string())?;
        }
    }
    cfg.model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = build_config(cli)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let stage = cli.stage.name();
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::data(stage, &cli.out, e))?;
    let mut io = Io {
        stage,
        input: cli.input.as_deref().unwrap_or(&cli.out),
        output: &cli.out,
        files: StageFiles::default(),
    };
    match cli.stage {
        Stage::Synth { .. } => stages::synth(&cfg, &mut io)?,
        Stage::Ingest => stages::ingest_stage(&cfg, &mut io)?,
        Stage::Label => stages::label(&cfg, &mut io)?,
        Stage::Features => stages::features(&cfg, &mut io)?,
        Stage::Train => stages::train_stage(&cfg, &mut io)?,
        Stage::Eval => stages::eval(&mut io)?,
        Stage::Gradcheck => stages::gradcheck(&cfg, &mut io)?,
        Stage::Report => stages::report(&cfg, &mut io)?,
    }
    let manifest = RunManifest {
        stage,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.model.seed,
        config_hash: cfg.hash(stage),
        config: &cfg.overrides,
        inputs: &io.files.inputs,
        outputs: &io.files.outputs,
    };
    let path = cli.out.join(format!("run_{stage}.json"));
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&path, json).map_err(|e| CliError::data(stage, &path, e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `s2s --help` for usage");
            ExitCode::from(2)
        }
        Err(CliError::Data { stage, path, cause }) => {
            eprintln!("error: {stage}: {}: {cause}", path.display());
            ExitCode::from(1)
        }
    }
}
