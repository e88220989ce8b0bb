//! `fluxon` command-line driver.
//!
//! ```text
//! fluxon compare --config scenario.json --out results/
//! fluxon exact --config scenario.json --n 8,16 --cond-cap 1e12
//! ```
//!
//! Exit status: 0 success, 2 configuration or I/O error, 3 numerical
//! failure, 4 acceptance check failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fluxon_cli::config::{Mode, ScenarioConfig};
use fluxon_cli::error::HarnessError;
use fluxon_cli::scenario::run_scenario;

#[derive(Parser)]
#[command(name = "fluxon", version, about = "Semiclassical sine-Gordon fluxon condensates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bohr-Sommerfeld spectra.
    Spectrum(RunArgs),
    /// Exact condensate samples.
    Exact(RunArgs),
    /// Elliptic asymptotic samples.
    Asymptotic(RunArgs),
    /// Exact versus asymptotic comparison.
    Compare(RunArgs),
    /// Whitham velocities and residuals.
    Whitham(RunArgs),
    /// SVG heatmaps of cos(u).
    Heatmap(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the configured one, then `.`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the condensate indices.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Override the quadrature order of the modulation integrals.
    #[arg(long)]
    order: Option<usize>,
    /// Override the Newton tolerance.
    #[arg(long)]
    newton_tol: Option<f64>,
    /// Override the exact-solver condition cap.
    #[arg(long)]
    cond_cap: Option<f64>,
}

fn run(mode: Mode, args: RunArgs) -> Result<i32, HarnessError> {
    let mut config = ScenarioConfig::from_path(&args.config)?;
    config.mode = Some(mode);
    if let Some(n) = args.n {
        config.n_list = n;
    }
    if let Some(o) = args.order {
        config.tolerances.quadrature_order = o;
    }
    if let Some(t) = args.newton_tol {
        config.tolerances.newton = t;
    }
    if let Some(c) = args.cond_cap {
        config.tolerances.cond_cap = c;
    }
    let out = args.out.or_else(|| config.outputs.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let (summary, _) = run_scenario(&config, &out)?;
    for f in &summary.failures {
        log::warn!("failure at (x, t) = ({}, {}) [{}]: {}", f.x, f.t, f.stage, f.error);
    }
    for c in &summary.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("{} nodes ok, {} failures, output in {}", summary.successes, summary.failures.len(), out.display());
    Ok(summary.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Spectrum(a) => (Mode::Spectrum, a),
        Command::Exact(a) => (Mode::Exact, a),
        Command::Asymptotic(a) => (Mode::Asymptotic, a),
        Command::Compare(a) => (Mode::Compare, a),
        Command::Whitham(a) => (Mode::Whitham, a),
        Command::Heatmap(a) => (Mode::Heatmap, a),
    };
    let code = match run(mode, args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
