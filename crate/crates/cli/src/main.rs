use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use opuc::Potential;
use opuc_cli::{parse_ladder, run, Command, ExperimentConfig, RunReport};

#[derive(Parser)]
#[command(name = "opuc", version, about = "Verblunsky coefficients for varying weights e^{-nV(cos λ)}")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON experiment config; flags below override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Potential as `{"coeffs": [a1, a2, ...], "name": "..."}`.
    #[arg(long, global = true, value_name = "JSON")]
    potential: Option<String>,
    /// Comma-separated n ladder, e.g. `20,40,80`.
    #[arg(long, global = true, value_name = "LIST")]
    n: Option<String>,
    /// Offset window half-width |m| <= W.
    #[arg(long, global = true, value_name = "INT")]
    window: Option<i64>,
    /// Starting precision in bits.
    #[arg(long, global = true, value_name = "BITS")]
    precision: Option<u32>,
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true, value_name = "INT")]
    jobs: Option<usize>,
    /// Largest Verblunsky index computed for every n.
    #[arg(long, global = true, value_name = "INT")]
    kmax: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Support arc, densities and the equilibrium conditions.
    Equilibrium,
    /// Verblunsky coefficients for every n of the ladder.
    Verblunsky,
    /// String equations and CMV unitarity.
    VerifyString,
    /// Fourier data, B coefficients, the Toeplitz symbol and the model slope.
    Asymptotics,
    /// Computed against predicted coefficients over the offset window.
    Compare,
    /// Every stage plus kernel-density convergence.
    Report,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Equilibrium => Command::Equilibrium,
            Cmd::Verblunsky => Command::Verblunsky,
            Cmd::VerifyString => Command::VerifyString,
            Cmd::Asymptotics => Command::Asymptotics,
            Cmd::Compare => Command::Compare,
            Cmd::Report => Command::Report,
        }
    }
}

fn build_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(json) = &cli.potential {
        cfg.potential = serde_json::from_str::<Potential>(json).map_err(|e| anyhow::anyhow!("potential: {e}"))?;
    }
    if let Some(list) = &cli.n {
        cfg.n = parse_ladder(list)?;
    }
    if let Some(w) = cli.window {
        cfg.window = w;
    }
    if cli.precision.is_some() {
        cfg.precision = cli.precision;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    if cli.kmax.is_some() {
        cfg.kmax = cli.kmax;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(report: &RunReport) {
    for c in &report.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        let n = c.n.map(|n| format!(" n={n}")).unwrap_or_default();
        println!("{tag} {}{n}: {:e} (threshold {:e})", c.name, c.value, c.threshold);
    }
    for e in &report.errors {
        println!("ERROR {}: {}", e.stage, e.message);
    }
    println!("status: {:?}, artifacts: {}", report.status, report.files.join(", "));
}

/// Runs the parsed command line and returns the process exit code.
fn execute(cli: &Cli) -> u8 {
    let outcome = build_config(cli).and_then(|cfg| run(&cfg, cli.command.into()));
    match outcome {
        Ok(report) => {
            print_summary(&report);
            report.status.exit_code() as u8
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(execute(&Cli::parse()))
}
