use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use serde::Serialize;

use nartmle::harness::{
    run_estimate, run_selftest, run_study, to_json, write_estimate_report, write_study_report,
    Environment, EstimateConfig, ExperimentConfig, MetricsTable,
};
use nartmle::{Error, Result};

#[derive(Parser)]
#[command(
    name = "nartmle",
    version,
    about = "Targeted estimation under network autoregression"
)]
struct Cli {
    /// Log progress to stderr (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo study and write report.csv, report.json, timing.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the configured worker count (0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Fit the configured methods to observed data.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the Monte Carlo truth of a study config as JSON.
    Oracle {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Serialize)]
struct OracleOutput {
    psi: f64,
    mc_se: f64,
    n_mc: usize,
    n_nodes: usize,
    n_edges: usize,
}

fn print_metrics(metrics: &MetricsTable) {
    println!(
        "psi_true = {:.6} (MC SE {:.2e}), R = {}",
        metrics.psi_true, metrics.psi_true_mc_se, metrics.replications
    );
    println!(
        "{:<6} {:>10} {:>10} {:>7} {:>10} {:>6}",
        "method", "bias", "se", "cp", "mean_se", "failed"
    );
    let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    for m in &metrics.methods {
        println!(
            "{:<6} {:>10} {:>10} {:>7} {:>10} {:>6}",
            m.method.name(),
            f(m.bias),
            f(m.se),
            f(m.cp),
            f(m.mean_se),
            m.n_failed
        );
    }
}

/// Returns the process exit code; errors map through `Error::exit_code`.
fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            workers,
        } => {
            let mut config = ExperimentConfig::from_file(&config)?;
            if let Some(w) = workers {
                config.workers = w;
            }
            let (outcome, timing) = run_study(&config)?;
            write_study_report(&out, &config, &outcome, &timing)?;
            print_metrics(&outcome.metrics);
            info!(
                "wrote reports to {} in {:.1}s",
                out.display(),
                timing.total_s
            );
        }
        Command::Estimate {
            data,
            edges,
            config,
            out,
            workers,
        } => {
            let mut config = EstimateConfig::from_file(&config)?;
            if let Some(w) = workers {
                config.workers = w;
            }
            let (report, times) = run_estimate(&data, &edges, &config)?;
            write_estimate_report(&out, &report, &times)?;
            println!(
                "N = {}, edges = {}, dropped isolated = {}",
                report.n_nodes,
                report.n_edges,
                report.dropped_ids.len()
            );
            for (method, outcome) in &report.methods {
                match outcome.result() {
                    Some(r) => println!(
                        "{:<6} psi_hat {:.6}  se {:.6}  ci [{:.6}, {:.6}]",
                        method.name(),
                        r.psi_hat,
                        r.se,
                        r.ci_lo,
                        r.ci_hi
                    ),
                    None => println!("{:<6} failed: {outcome:?}", method.name()),
                }
            }
        }
        Command::Oracle { config } => {
            let config = ExperimentConfig::from_file(&config)?;
            let env = Environment::reference(&config)?;
            let out = OracleOutput {
                psi: env.oracle.psi,
                mc_se: env.oracle.mc_se,
                n_mc: env.oracle.n_mc,
                n_nodes: env.network.n(),
                n_edges: env.network.graph().n_edges(),
            };
            std::io::stdout()
                .write_all(&to_json(&out)?)
                .map_err(|e| Error::io("stdout", e))?;
        }
        Command::Selftest => {
            let checks = run_selftest();
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!(
                    "[{}] {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            if failed > 0 {
                eprintln!("{failed} selftest check(s) failed");
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
