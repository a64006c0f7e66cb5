use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::{error, info};
use superrad_cli::{output_root, run, CliError, CliResult, ExperimentConfig, ExperimentId, RunOptions};

/// Runs a superradiance experiment and writes CSVs, raw records, plots and a manifest.
#[derive(Debug, Parser)]
#[command(name = "superrad", version)]
struct Args {
    /// fig3, fig4, fig5a, fig5b, fig5c, sweep or custom; overrides the file.
    #[arg(long)]
    experiment: Option<String>,

    /// TOML overlay on the experiment's built-in configuration.
    #[arg(long)]
    params: Option<PathBuf>,

    /// Master seed; overrides the file.
    #[arg(long)]
    seed: Option<u64>,

    /// Output root; defaults to $SUPERRAD_OUT, then ./superrad-out.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads for trajectory ensembles.
    #[arg(long)]
    threads: Option<usize>,

    /// Skip SVG rendering.
    #[arg(long)]
    no_plots: bool,
}

fn execute(args: &Args) -> CliResult<i32> {
    let overlay = match &args.params {
        Some(p) => Some(fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let id = args.experiment.as_deref().map(str::parse::<ExperimentId>).transpose()?;
    let mut cfg = ExperimentConfig::resolve(overlay.as_deref(), id)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if args.threads == Some(0) {
        return Err(CliError::Config("--threads must be positive".into()));
    }
    let opts = RunOptions {
        out_root: output_root(args.out.as_deref()),
        threads: args.threads,
        plots: !args.no_plots,
    };
    let outcome = run(&cfg, &opts)?;
    info!(
        "{} outputs in {} ({:.1} s)",
        outcome.manifest.outputs.len(),
        outcome.dir.display(),
        outcome.manifest.wall_time_s
    );
    match outcome.error {
        Some(e) => {
            error!("run incomplete: {e}");
            Ok(e.exit_code())
        }
        None if !outcome.manifest.complete => Ok(1),
        None => Ok(0),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let code = execute(&args).unwrap_or_else(|e| {
        error!("{e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
