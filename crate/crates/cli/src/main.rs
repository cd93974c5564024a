//! `oodspec` command-line driver.

mod commands;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oodspec::ingest::InputFormat;

#[derive(Debug, Parser)]
#[command(name = "oodspec", version, about = "Human-centred OOD spectrum and error-alignment analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check trial files against the config and summarize coverage.
    Validate(Common),
    /// Generate synthetic trials from a scenario file.
    Simulate(Common),
    /// Score conditions and fit the OOD regimes.
    Spectrum(Common),
    /// Pairwise EC, MA and CLED per condition.
    Align(Common),
    /// Human-normalized rankings (needs spectrum and align outputs).
    Rank(Common),
    /// Family permutation tests and CLED separability (needs spectrum and align outputs).
    Permtest(Common),
    /// Rank-sum, binomial and normality screening tables.
    Stats(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Analysis config (TOML); a scenario file for `simulate`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Trial files; overrides the config's input paths.
    #[arg(long = "input", value_name = "PATH")]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "n-perm")]
    pub n_perm: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    pub format: Option<InputFormat>,
    /// Candidate component counts, e.g. `1..6`.
    #[arg(long = "k-range", value_parser = parse_k_range)]
    pub k_range: Option<(usize, usize)>,
}

fn parse_format(s: &str) -> Result<InputFormat, String> {
    s.parse()
}

fn parse_k_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once("..=")
        .or_else(|| s.split_once(".."))
        .ok_or_else(|| format!("expected `a..b`, got `{s}`"))?;
    let n = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    Ok((n(a)?, n(b)?))
}

/// Exit code 2 marks invalid input or config; 1 anything else.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let result = match &cli.command {
        Command::Validate(c) => commands::validate(c),
        Command::Simulate(c) => commands::simulate(c),
        Command::Spectrum(c) => commands::spectrum(c),
        Command::Align(c) => commands::align(c),
        Command::Rank(c) => commands::rank(c),
        Command::Permtest(c) => commands::permtest(c),
        Command::Stats(c) => commands::stats(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = if e.code == 2 { "invalid_input" } else { "internal" };
            let body = serde_json::json!({ "error": { "kind": kind, "code": e.code, "message": e.message } });
            eprintln!("{body}");
            ExitCode::from(e.code)
        }
    }
}
