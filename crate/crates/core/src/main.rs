use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use killing_probe::metric::CATALOG_NAMES;
use killing_probe::oracles::rank_formula;
use killing_probe::runner::{
    configure_threads, exit_code, report_json, run_analyze, run_crossvalidate, run_sweep, summary_text, sweep_csv, sweep_json,
    sweep_summary, write_outputs, RunConfig,
};
use killing_probe::{Error, Result};

/// Detect polynomial-in-momenta first integrals of geodesic flows on a disc.
#[derive(Parser)]
#[command(name = "killing-probe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Obstruction analysis with oracle cross-checks.
    Analyze {
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat the analysis over a perturbation amplitude grid.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct kernel vectors and audit their conservation.
    Crossvalidate {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Catalog metrics.
    Catalog {
        #[arg(long, required = true)]
        list: bool,
    },
    /// Prolongation bundle rank and jet order N(n, d).
    RankFormula {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        d: u64,
    },
}

const CATALOG_HELP: [&str; 6] = [
    "n (2)",
    "n (2)",
    "n (2), radius (1)",
    "f ([1, 0, 1]), h ([1, 0, 0, 0, 1])",
    "rho ([1, 0, 0.25])",
    "n (2), amplitude (0.05), cutoff (2), seed (0)",
];

fn load(path: &Path, out: Option<PathBuf>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(out) = out {
        cfg.output = out;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Analyze { config, out } => {
            let cfg = load(&config, out)?;
            let report = run_analyze(&cfg)?;
            let summary = summary_text(&report);
            write_outputs(&cfg.output, &report_json(&report), &summary, None)?;
            print!("{summary}");
            Ok(!report.has_errors())
        }
        Command::Crossvalidate { config, out } => {
            let cfg = load(&config, out)?;
            let report = run_crossvalidate(&cfg)?;
            let summary = summary_text(&report);
            write_outputs(&cfg.output, &report_json(&report), &summary, None)?;
            print!("{summary}");
            Ok(!report.has_errors())
        }
        Command::Sweep { config, out } => {
            let cfg = load(&config, out)?;
            let reports = run_sweep(&cfg)?;
            let summary = sweep_summary(&reports);
            write_outputs(&cfg.output, &sweep_json(&reports), &summary, Some(&sweep_csv(&reports)))?;
            print!("{summary}");
            Ok(!reports.iter().any(|r| r.has_errors()))
        }
        Command::Catalog { .. } => {
            for (name, params) in CATALOG_NAMES.iter().zip(CATALOG_HELP) {
                println!("{name:<16} {params}; domain_radius (1)");
            }
            Ok(true)
        }
        Command::RankFormula { n, d } => {
            let (rank, jet) = rank_formula(n, d)?;
            println!("rank {rank}");
            println!("N({n},{d}) {jet}");
            Ok(true)
        }
    }
}

fn report_error(e: &Error) -> ExitCode {
    let obj = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
    eprintln!("{obj}");
    ExitCode::from(exit_code(e) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        return report_error(&e);
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => report_error(&e),
    }
}
