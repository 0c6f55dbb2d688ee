//! Experiment runner: models, averaging schemes and convergence diagnostics
//! with machine-readable reports.
//!
//! Exit codes: 0 when every requested certification passes (or is
//! inconclusive and explicitly allowed), 1 on certification failure,
//! 2 on configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod run;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "ergodual", version, about = "Averaging-scheme diagnostics for kernel operators on countable metric spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SchemeFlags {
    /// Config file (JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model name (see `list-models`).
    #[arg(long)]
    model: Option<String>,
    /// Model truncation parameter.
    #[arg(long)]
    truncation: Option<usize>,
    /// Scheme: cesaro, backward-cesaro, abel or time.
    #[arg(long)]
    scheme: Option<String>,
    /// Largest Cesaro index (dyadic grid up to this value).
    #[arg(long)]
    n_max: Option<u64>,
    /// Comma-separated Abel parameters in [0, 1).
    #[arg(long, value_delimiter = ',')]
    r_grid: Option<Vec<f64>>,
    /// Comma-separated time-grid points.
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    /// Diagnostics to run (repeatable): as1, as3, hull, projection,
    /// e-property, beta0, tightness, equivalences.
    #[arg(long = "check")]
    checks: Vec<String>,
    /// Plateau tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Seed for randomized sweeps.
    #[arg(long)]
    seed: Option<u64>,
    /// Accept inconclusive certifications.
    #[arg(long)]
    allow_inconclusive: bool,
    /// Output directory for reports and series.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run scheme/ergodicity diagnostics and write a JSON report plus CSV series.
    Diagnose(SchemeFlags),
    /// Reproduce a bundled example end to end and compare with its fixture.
    Reproduce {
        /// ex61 | ex62 | ex63 (aliases: summing-l1, z-infinity, cycles-line)
        example: String,
        /// Verdict JSON output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export decay curves and profiles as CSV for external plotting.
    ExportPlotdata(SchemeFlags),
    /// List the bundled models.
    ListModels,
}

fn effective_config(flags: &SchemeFlags) -> anyhow::Result<RunConfig> {
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &flags.model {
        cfg.model = m.clone();
    }
    if flags.truncation.is_some() {
        cfg.truncation = flags.truncation;
    }
    if let Some(s) = &flags.scheme {
        cfg.scheme = s.clone();
    }
    if flags.n_max.is_some() {
        cfg.n_max = flags.n_max;
    }
    if flags.r_grid.is_some() {
        cfg.r_grid = flags.r_grid.clone();
    }
    if flags.t_grid.is_some() {
        cfg.t_grid = flags.t_grid.clone();
    }
    if !flags.checks.is_empty() {
        cfg.diagnostics = flags.checks.clone();
    }
    if flags.tol.is_some() {
        cfg.tol = flags.tol;
    }
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    if flags.allow_inconclusive {
        cfg.allow_inconclusive = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome: anyhow::Result<i32> = match &cli.command {
        Command::Diagnose(flags) => {
            effective_config(flags).and_then(|cfg| run::diagnose(&cfg, &flags.out))
        }
        Command::ExportPlotdata(flags) => {
            effective_config(flags).and_then(|cfg| run::export_plotdata(&cfg, &flags.out))
        }
        Command::Reproduce { example, out } => run::reproduce(example, out.as_ref()),
        Command::ListModels => Ok(run::list_models()),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
