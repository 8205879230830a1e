//! `adiabat`: runs the verification suites on model files and writes CSV
//! tables, `report.csv` and `summary.json` into the output directory.
//!
//! Exit status: 0 when every gated check passes, 1 when one fails, 2 on
//! invalid input.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use output::{Run, Summary};

#[derive(Parser)]
#[command(name = "adiabat", version, about = "Verification suites for foliations under adiabatic limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact identities on a Lie frame model.
    VerifyFrame(Config),
    /// Connection, curvature and operator structure on a grid model.
    VerifyGrid(Config),
    /// Lichnerowicz residual ladder over resolutions.
    Lichnerowicz(Config),
    /// Gap probe over σ and ε schedules.
    SweepEps(Config),
    /// Low spectrum of D² and −Δ.
    Spectrum(Config),
    /// Characteristic forms, closure and pairings.
    Charclass(Config),
    /// Almost-isometric split checks and the γ rescaling law.
    AppendixCheck(Config),
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct Config {
    /// Model file (TOML).
    #[arg(long)]
    pub model: PathBuf,
    /// Resolutions, powers of two in [4, 128], increasing.
    #[arg(long = "N", value_delimiter = ',')]
    pub n: Vec<usize>,
    /// ε schedule, positive and decreasing.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eps: Vec<f64>,
    /// γ schedule as rationals (`1`, `1/4`, ...), positive and decreasing.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub gamma: Vec<String>,
    /// σ schedule, positive and decreasing; scales the non-constant metric terms.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub sigma: Vec<f64>,
    /// Random sections or vectors per randomized check.
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the principal tolerance of the subcommand.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Eigenvalues requested by `spectrum`.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Eigensolver iteration cap.
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
}

/// Why a run stopped early.
pub enum Stop {
    /// Bad flags, unreadable or invalid model: exit 2.
    Input(String),
    /// A computation could not complete: exit 1.
    Failed(String),
}

impl From<adiabat::Error> for Stop {
    fn from(e: adiabat::Error) -> Self {
        match e {
            adiabat::Error::NoConvergence { .. } => Stop::Failed(e.to_string()),
            _ => Stop::Input(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, cfg) = match &cli.command {
        Command::VerifyFrame(c) => ("verify-frame", c),
        Command::VerifyGrid(c) => ("verify-grid", c),
        Command::Lichnerowicz(c) => ("lichnerowicz", c),
        Command::SweepEps(c) => ("sweep-eps", c),
        Command::Spectrum(c) => ("spectrum", c),
        Command::Charclass(c) => ("charclass", c),
        Command::AppendixCheck(c) => ("appendix-check", c),
    };
    let mut run = Run::default();
    let res = match &cli.command {
        Command::VerifyFrame(c) => commands::verify_frame(c, &mut run),
        Command::VerifyGrid(c) => commands::verify_grid(c, &mut run),
        Command::Lichnerowicz(c) => commands::lichnerowicz(c, &mut run),
        Command::SweepEps(c) => commands::sweep_eps(c, &mut run),
        Command::Spectrum(c) => commands::spectrum(c, &mut run),
        Command::Charclass(c) => commands::charclass(c, &mut run),
        Command::AppendixCheck(c) => commands::appendix_check(c, &mut run),
    };
    let (code, error) = match res {
        Err(Stop::Input(e)) => (2, Some(e)),
        Err(Stop::Failed(e)) => (1, Some(e)),
        Ok(()) if run.report.gated_pass() => (0, None),
        Ok(()) => (1, None),
    };
    for r in &run.report.records {
        let idx = if r.indices.is_empty() { String::new() } else { format!(" {:?}", r.indices) };
        println!("{:8} {} {}{idx} {}", r.status(), r.model, r.check, r.detail);
    }
    if let Some(e) = &error {
        eprintln!("error: {e}");
    }
    let summary = Summary { command: name, config: cfg, model_id: &run.model_id, exit_code: code, passed: code == 0, error };
    if let Err(e) = output::write_all(&cfg.out, &run, &summary) {
        eprintln!("error: cannot write to {}: {e}", cfg.out.display());
        return ExitCode::from(2);
    }
    ExitCode::from(code as u8)
}
