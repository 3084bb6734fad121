//! Command-line front end. Each subcommand runs one pipeline stage and
//! writes its artifacts plus `manifest.json` into the output directory.

mod config;
mod manifest;
mod stages;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{
    DiscoverConfig, FeaturesConfig, FetchConfig, GridSearchConfig, IngestConfig, LibraryConfig, ModelKind,
    RolloutConfig, RunConfig,
};
pub use manifest::{file_digest, Manifest, StageRecord, MANIFEST_FILE};
pub use stages::{
    IngestArtifact, SurrogateArtifact, DATA_FILE, FEATURES_FILE, GRID_ARCH_FILE, GRID_MK_FILE, INGEST_FILE,
    MODEL_FILE, REPORT_FILE, ROLLOUT_FILE, ROLLOUT_MSE_FILE, SURROGATE_FILE,
};

use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

/// Equation discovery from data: simulate or ingest a dataset, fit a
/// surrogate network, then regress its time derivative on derivative terms.
///
/// The configuration is JSON (see `RunConfig`); any field may be omitted.
/// Without `--config` the stages reuse `<out>/config.json`, which every
/// stage rewrites, so a chain of subcommands shares one configuration.
///
/// Exit codes: 0 success, 1 usage error, 2 runtime failure.
#[derive(Debug, Parser)]
#[command(name = "pdedisc", version)]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every stochastic component; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Solve viscous Burgers and write the samples to data.csv.
    Simulate,
    /// Fit the surrogate network to the dataset; writes surrogate.json.
    Fit,
    /// Fit a linear or operator-network model of u_t; writes model.json.
    Discover,
    /// Residual cost over (m, k) and operator architectures; writes grid_*.csv.
    Gridsearch,
    /// Variance, stability and RFE rank per library term; writes features.csv.
    Features,
    /// Integrate a derivative-free model per node and compare with the
    /// Burgers reference; writes rollout.csv and rollout_mse.csv.
    Rollout,
    /// Grid station observations (file or HTTP, cached under
    /// $PDEDISC_CACHE_DIR); writes data.csv and ingest.json.
    Ingest,
    /// Verify the artifact chain and print a summary; writes report.txt.
    Report,
    /// Print the effective configuration.
    Config,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Discover => "discover",
            Command::Gridsearch => "gridsearch",
            Command::Features => "features",
            Command::Rollout => "rollout",
            Command::Ingest => "ingest",
            Command::Report => "report",
            Command::Config => "config",
        }
    }
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let saved = cli.out.join("config.json");
    let mut cfg = match &cli.config {
        Some(p) if !p.exists() => return Err(Error::Usage(format!("config {} does not exist", p.display()))),
        Some(p) => RunConfig::from_file(p)?,
        None if saved.exists() => RunConfig::from_file(&saved)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.propagate_seed();
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<String> {
    let cfg = effective_config(cli)?;
    if let Command::Config = cli.command {
        return cfg.to_json();
    }
    std::fs::create_dir_all(&cli.out)?;
    let hash = cfg.hash();
    if !matches!(cli.command, Command::Report) {
        std::fs::write(cli.out.join("config.json"), cfg.to_json()?)?;
    }
    let ctx = stages::Context {
        cfg,
        out: cli.out.clone(),
        hash,
    };
    log::info!("{} (config {})", cli.command.name(), manifest::short(&ctx.hash));
    match cli.command {
        Command::Simulate => stages::simulate(&ctx),
        Command::Fit => stages::fit(&ctx),
        Command::Discover => stages::discover(&ctx),
        Command::Gridsearch => stages::gridsearch(&ctx),
        Command::Features => stages::features(&ctx),
        Command::Rollout => stages::rollout(&ctx),
        Command::Ingest => stages::ingest(&ctx),
        Command::Report => stages::report(&ctx),
        Command::Config => unreachable!(),
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) | Error::Config(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (including the program name), runs the stage and returns
/// the process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return EXIT_FAILURE;
        }
    };
    match pool.install(|| execute(&cli)) {
        Ok(text) => {
            println!("{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
