//! `distill-lab`: pretrain, distill, generate, evaluate and report from one
//! config file.

mod commands;
mod rundir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use distill_lab::eval::Method;
use distill_lab::pipeline::RunConfig;

use rundir::error_record;

#[derive(Parser, Debug)]
#[command(
    name = "distill-lab",
    version,
    about = "Text dataset distillation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML run config; the built-in desk preset when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output root; each run writes to `<out>/<subcommand>-<config hash>/`.
    #[arg(long, env = "DISTILL_LAB_OUT", default_value = "runs")]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Override any config key, e.g. `--set distill.outer_loops=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train the generator as a plain class-conditional language model.
    Pretrain {
        #[command(flatten)]
        common: Common,
    },
    /// Fine-tune a generator by gradient matching.
    Distill {
        #[command(flatten)]
        common: Common,
        /// Pretrained generator; pretrains in-process when absent.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Sample, deduplicate and select a distilled dataset.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dpc: Option<usize>,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Build coreset baselines (random, kcenters, herding) from real data.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        methods: Vec<Method>,
        #[arg(long)]
        dpc: Option<usize>,
    },
    /// Train fresh learners on each method's datasets and compare.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        methods: Vec<Method>,
        #[arg(long)]
        dpc: Option<usize>,
        /// Distilled generator for `dilm`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Pretrained generator for `vanilla_lm` (and as the start of
        /// distillation when `--checkpoint` is absent).
        #[arg(long)]
        pretrained: Option<PathBuf>,
        /// Also evaluate with `experiment.cross_arch`.
        #[arg(long)]
        cross: bool,
    },
    /// Evaluate methods over several dataset sizes with one generator.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        methods: Vec<Method>,
        #[arg(long, value_delimiter = ',')]
        dpc: Vec<usize>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        pretrained: Option<PathBuf>,
    },
    /// Disable the representative teacher, diverse mini-batches and final
    /// selection one at a time.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dpc: Option<usize>,
        /// Pretrained generator shared by all four distillation runs.
        #[arg(long)]
        pretrained: Option<PathBuf>,
        /// Already distilled generator for the full row.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Re-render Markdown, CSV and SVG from an existing run's reports.json.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Pretrain { .. } => "pretrain",
            Command::Distill { .. } => "distill",
            Command::Generate { .. } => "generate",
            Command::Baseline { .. } => "baseline",
            Command::Evaluate { .. } => "evaluate",
            Command::Sweep { .. } => "sweep",
            Command::Ablate { .. } => "ablate",
            Command::Report { .. } => "report",
        }
    }
}

/// Failure class; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

/// Base config (file or desk preset) with `--seed`, `--workers` and every
/// `--set` applied in order.
pub fn resolve_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_toml(&text).map_err(|e| Failure::Usage(e.to_string()))?
        }
        None => RunConfig::desk().normalized(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    for s in &common.set {
        cfg = cfg
            .with_override(s)
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let name = cli.command.name();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err((failure, dir)) => {
            let (kind, message, code) = match &failure {
                Failure::Usage(m) => ("usage", m.clone(), 2),
                Failure::Runtime(e) => ("runtime", format!("{e:#}"), 1),
            };
            let record = error_record(name, kind, &message);
            eprintln!("{record}");
            if let Some(dir) = dir {
                let _ = std::fs::write(dir.join("error.json"), format!("{record}\n"));
            }
            ExitCode::from(code)
        }
    }
}
