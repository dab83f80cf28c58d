//! `rotorbits` — rotation-type periodic orbits of spatially periodic
//! Hamiltonian systems at fixed energy.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rotorbits_cli::commands::render_table;
use rotorbits_cli::commands::{
    run_analyze, run_export, run_solve, run_verify, write_solve_artifacts,
};
use rotorbits_cli::config::load_config;
use rotorbits_cli::report::to_json_bytes;
use rotorbits_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "rotorbits", about = "rotation-orbit solver pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Flat dotted-key config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `rng.seed`).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Energy context and surface-section report.
    Analyze(Common),
    /// Full pipeline: critical points, rotation solutions, classification.
    Solve(Common),
    /// Invariant suite with a pass/fail table.
    Verify(Common),
    /// Figure-style CSV data from an existing report.
    Export(Common),
}

fn run(cmd: &Command) -> CliResult<()> {
    let common = match cmd {
        Command::Analyze(c) | Command::Solve(c) | Command::Verify(c) | Command::Export(c) => c,
    };
    let mut cfg = load_config(&common.config)?;
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }

    match cmd {
        Command::Analyze(_) => {
            let report = run_analyze(&cfg)?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            std::fs::write(cfg.out_dir.join("analyze.json"), to_json_bytes(&report))?;
            println!(
                "{}: M = {}, M* = {:.6}, momentum radii [{:.9}, {:.9}]",
                report.system,
                report.m,
                report.context.mstar,
                report.radius_low,
                report.radius_high
            );
            println!(
                "surface residual {:.3e}, homogeneity {:.3e}, chart round trip {:.3e} over {} samples",
                report.surface_residual,
                report.homogeneity_defect,
                report.chart_roundtrip,
                report.surface_samples
            );
            Ok(())
        }
        Command::Solve(_) => {
            let artifacts = run_solve(&cfg)?;
            write_solve_artifacts(&artifacts, &cfg.out_dir)?;
            let cls = &artifacts.report.classification;
            println!(
                "{} solutions in {} classes (target {}, bound {}), P1/P2 = {}/{}",
                artifacts.report.solutions.len(),
                cls.distinct_count,
                cls.bound_target,
                if cls.bound_met { "met" } else { "not met" },
                cls.p1_count,
                cls.p2_count
            );
            if artifacts.report.solutions.is_empty() {
                return Err(CliError::NoSolutions(format!(
                    "diagnostics written to {}",
                    cfg.out_dir.join("report.json").display()
                )));
            }
            Ok(())
        }
        Command::Verify(_) => {
            let checks = run_verify(&cfg)?;
            print!("{}", render_table(&checks));
            std::fs::create_dir_all(&cfg.out_dir)?;
            std::fs::write(cfg.out_dir.join("verify.json"), to_json_bytes(&checks))?;
            if checks.iter().all(|c| c.pass) {
                Ok(())
            } else {
                Err(CliError::Internal(
                    "invariant suite reported failures".into(),
                ))
            }
        }
        Command::Export(_) => {
            let outcome = run_export(&cfg, &cfg.out_dir)?;
            println!("exported: {}", outcome.files.join(", "));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
