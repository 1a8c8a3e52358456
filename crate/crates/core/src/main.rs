use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use simrate::harness::{
    run_once, self_check, sweep_layers, sweep_thickness, write_trace, Algorithm, ExperimentConfig, SweepResult,
};
use simrate::Result;

#[derive(Parser)]
#[command(name = "simrate", version, about = "Rate optimization for stacked-metasurface MIMO links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the number of layers per SIM at fixed thickness.
    SweepLayers(RunArgs),
    /// Sweep the SIM thickness at fixed layer counts.
    SweepThickness(RunArgs),
    /// Run one trial and print the result rows.
    RunOnce(RunArgs),
    /// Verify gradients, cascades and the closed-form updates on toy instances.
    SelfCheck,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV (stdout when absent and the config names none).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict to one algorithm: rmax-random, imin or hybrid.
    #[arg(long)]
    algo: Option<Algorithm>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Per-iteration trace CSV of the last algorithm (run-once only).
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(algo) = self.algo {
            cfg.algorithms = vec![algo];
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit_sweep(result: &SweepResult, cfg: &ExperimentConfig) -> Result<()> {
    match &cfg.output {
        Some(path) => {
            result.save(path)?;
            eprintln!("wrote {}", path.display());
        }
        None => result.write_csv(io::stdout().lock())?,
    }
    for row in result.aggregate() {
        eprintln!("{:>8} {:<12} mean {:>9.4} std {:>8.4} n {}", row.axis_value, row.algo, row.mean_rate, row.std_rate, row.n);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let args = match &cli.command {
        Command::SelfCheck => {
            let report = self_check()?;
            print!("{report}");
            return Ok(report.passed());
        }
        Command::SweepLayers(a) | Command::SweepThickness(a) | Command::RunOnce(a) => a,
    };
    let cfg = args.config()?;
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| simrate::SimError::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::SweepLayers(_) => emit_sweep(&sweep_layers(&cfg)?, &cfg)?,
        Command::SweepThickness(_) => emit_sweep(&sweep_thickness(&cfg)?, &cfg)?,
        Command::RunOnce(_) => {
            let results = run_once(&cfg)?;
            let rows: Vec<_> = results.iter().map(|(r, _)| r.clone()).collect();
            match &cfg.output {
                Some(path) => simrate::harness::sweep::write_rows(&rows, File::create(path)?)?,
                None => simrate::harness::sweep::write_rows(&rows, io::stdout().lock())?,
            }
            if let (Some(path), Some((_, sol))) = (&args.trace, results.last()) {
                write_trace(sol, File::create(path)?)?;
            }
        }
        Command::SelfCheck => unreachable!(),
    }
    io::stdout().flush()?;
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
