//! Command-line driver: parses a TOML run configuration, runs one of the
//! experiments and writes `report.json` plus CSV tables into the output
//! directory.
//!
//! Exit status: 0 on success, 1 on solver failure, 2 on configuration
//! errors, 3 when `verify` finds the inequality violated.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{RunConfig, SweepAxis, DEFAULT_SEED, WORKERS_ENV};

#[derive(Debug, Parser)]
#[command(name = "twistwave", version, about = "Eigenvalue-moment bounds for twisted waveguides")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; overrides the config and the environment.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Seed of the eigensolver starting blocks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ground state of the cross-section operator.
    CrossSection,
    /// Moment bound with its fibre table.
    Bound,
    /// One bound per value along an axis.
    Sweep {
        #[arg(long, value_enum)]
        axis: Option<SweepAxis>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// Direct truncated 3D solve compared with the bound.
    Verify {
        #[arg(long, hide = true)]
        corrupt_bound: bool,
    },
    /// Direct truncated 3D spectrum below the threshold.
    Direct,
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Solver(String),
    Verify,
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Solver(_) => 1,
            Failure::Config(_) => 2,
            Failure::Verify => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Solver(m) => write!(f, "solver failure: {m}"),
            Failure::Verify => f.write_str("verification FAILED: the direct moment exceeds the bound"),
        }
    }
}

/// Flag, then environment, then config, then all cores.
fn worker_count(cli: &Cli, cfg: &RunConfig) -> Result<usize, Failure> {
    if let Some(n) = cli.workers {
        return if n > 0 { Ok(n) } else { Err(Failure::Config("--workers must be at least 1".into())) };
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Failure::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
        };
    }
    Ok(cfg.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

pub fn run(cli: &Cli) -> Result<(), Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::Config("--config PATH is required".into()))?;
    let cfg = RunConfig::load(path).map_err(|e| Failure::Config(e.0))?;
    let level = if cli.verbose || cfg.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new().filter_level(level).try_init();

    let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)
        .map_err(|e| Failure::Config(format!("cannot create output directory {}: {e}", out.display())))?;
    let workers = worker_count(cli, &cfg)?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    log::info!("{workers} workers, seed {seed}");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::Solver(format!("cannot start worker pool: {e}")))?;

    let ctx = commands::Context { config: &cfg, out: &out, seed };
    pool.install(|| match &cli.command {
        Command::CrossSection => commands::cross_section(&ctx),
        Command::Bound => commands::bound(&ctx),
        Command::Direct => commands::direct(&ctx),
        Command::Verify { corrupt_bound } => commands::verify(&ctx, *corrupt_bound),
        Command::Sweep { axis, values } => {
            let axis = axis
                .or(cfg.sweep.as_ref().map(|s| s.axis))
                .ok_or_else(|| Failure::Config("sweep needs --axis or a [sweep] section".into()))?;
            let values = if !values.is_empty() {
                values.clone()
            } else if let Some(s) = cfg.sweep.as_ref().filter(|s| s.axis == axis && !s.values.is_empty()) {
                s.values.clone()
            } else if axis == SweepAxis::Resolution {
                cfg.resolutions.clone()
            } else {
                Vec::new()
            };
            commands::sweep(&ctx, axis, &values)
        }
    })
}
