//! Batch CLI for imprecise reliability analyses.
//!
//! Exit codes: 0 — completed, every replication converged; 1 — runtime
//! failure or unconverged replications; 2 — invalid configuration.

use clap::{Parser, Subcommand};
use isra::config::{ConfigError, Method, RunConfig};
use isra::report::{write_plot_data, RunReport};
use isra::runner::run_config;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "isra",
    version,
    about = "Failure-probability bounds for probability-box inputs via two-level adaptive Kriging"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analysis a configuration file describes.
    Run { config: PathBuf },
    /// Run the brute-force reference oracle for the configured problem
    /// (overrides the config's `method`).
    Oracle { config: PathBuf },
    /// Dump plot-ready CSV files (design points, interval boxes, optimizer
    /// traces) from a report.json.
    PlotData {
        report: PathBuf,
        /// Output directory; defaults to `plots/` next to the report.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn load_config(path: &Path) -> Result<RunConfig, u8> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read config {}: {e}", path.display());
        EXIT_CONFIG
    })?;
    RunConfig::from_text(&text).map_err(|e: ConfigError| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_CONFIG
    })
}

fn print_summary(report: &RunReport) {
    println!(
        "problem: {} ({}, {}), {} replication(s)",
        report.problem,
        report.pbox_mode,
        report.command,
        report.rows.len()
    );
    println!("{:<10} {:>14} {:>14} {:>10}", "column", "mean", "std", "cov");
    let agg = &report.aggregates;
    for (name, s) in [
        ("pf_lower", agg.pf_lower),
        ("pf_upper", agg.pf_upper),
        ("n1", agg.n1),
        ("n2_lower", agg.n2_lower),
        ("n2_upper", agg.n2_upper),
    ] {
        println!(
            "{:<10} {:>14.6e} {:>14.6e} {:>9.2}%",
            name,
            s.mean,
            s.std,
            100.0 * s.cov
        );
    }
}

fn execute(cfg: &RunConfig) -> u8 {
    let report = match run_config(cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    match report.write(&cfg.output_dir) {
        Ok((csv, json)) => {
            print_summary(&report);
            println!("report: {}, {}", csv.display(), json.display());
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    }
    if report.all_converged() {
        0
    } else {
        let failed: Vec<String> = report
            .rows
            .iter()
            .filter(|r| !r.converged)
            .map(|r| r.replication.to_string())
            .collect();
        eprintln!("unconverged replication(s): {}", failed.join(", "));
        EXIT_RUNTIME
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config } => match load_config(&config) {
            Ok(cfg) => execute(&cfg),
            Err(code) => code,
        },
        Command::Oracle { config } => match load_config(&config) {
            Ok(mut cfg) => {
                cfg.method = Method::BruteForceOracle;
                execute(&cfg)
            }
            Err(code) => code,
        },
        Command::PlotData { report, out_dir } => {
            let loaded = match RunReport::load(&report) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_RUNTIME);
                }
            };
            let dir = out_dir.unwrap_or_else(|| {
                report
                    .parent()
                    .unwrap_or_else(|| Path::new("."))
                    .join("plots")
            });
            match write_plot_data(&loaded, &dir) {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    0
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_RUNTIME
                }
            }
        }
    };
    ExitCode::from(code)
}
