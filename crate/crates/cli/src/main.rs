//! `symspace`: batch front-end for the model spaces, their curvature and
//! Radon transforms. Reports and CSV files go to the output directory; the
//! exit status is 0 iff every check of the run passed (1 on a failed check,
//! 2 on usage or configuration errors).

mod commands;
mod config;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "symspace",
    version,
    about = "Ricci-type symplectic symmetric spaces: checks and transforms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the model tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run the property suite for the configured space.
    Verify {
        /// Perturb the connection by a symmetric tensor; the Ricci-type check must then fail.
        #[arg(long)]
        perturb_connection: bool,
    },
    /// Integrate a geodesic and write its trace.
    Geodesic,
    /// Curvature reports at sampled points.
    Curvature,
    /// Radon transform over random submanifolds of an orbit.
    Radon,
    /// Dual transform at sampled points (compact elliptic case).
    DualRadon,
    /// Classical Radon inversion in R^3 on a Gaussian.
    InvertR3,
    /// Classify the generator of the configured space.
    Classify,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(tol) = cli.tol {
        cfg.tol = tol;
    }
    if let Command::Verify {
        perturb_connection: true,
    } = cli.command
    {
        cfg.verify.perturb_connection = true;
    }
    Ok(cfg)
}

fn run(cli: &Cli, cfg: &RunConfig) -> Result<bool> {
    let run = match cli.command {
        Command::Verify { .. } => {
            let report = verify::run(cfg)?;
            for c in &report.checks {
                println!(
                    "{} {:<32} {:.3e} (tol {:.0e})",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tol
                );
            }
            let mut outputs = output::Outputs::default();
            outputs.add_json("verify_report.json", &report)?;
            commands::Run {
                outputs,
                passed: report.passed,
            }
        }
        Command::Geodesic => commands::geodesic(cfg)?,
        Command::Curvature => commands::curvature(cfg)?,
        Command::Radon => commands::radon_cmd(cfg)?,
        Command::DualRadon => commands::dual_radon_cmd(cfg)?,
        Command::InvertR3 => commands::invert_r3(cfg)?,
        Command::Classify => commands::classify(cfg)?,
    };
    for path in run.outputs.write(&cfg.out)? {
        log::info!("wrote {}", path.display());
    }
    Ok(run.passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match run(&cli, &cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
