//! `hdxcsp`: command-line driver for walks, spectra and CSP rounding on simplicial complexes.
//!
//! Exit codes: 0 on success, 2 on invalid input or parameters, 3 on numerical failure.
//! Errors are written to stderr as `{"error": {"kind": ..., "message": ...}}`.

mod commands;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "hdxcsp", version, about = "Walks, spectra and SoS rounding on high-dimensional expanders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simplicial complex statistics and expansion parameters.
    #[command(subcommand)]
    Complex(ComplexCmd),
    /// Transition matrices between levels of a complex.
    #[command(subcommand)]
    Walks(WalksCmd),
    /// Spectra of walks and graphs.
    #[command(subcommand)]
    Spectra(SpectraCmd),
    /// MAX k-CSP: brute force, relaxation, rounding.
    #[command(subcommand)]
    Csp(CspCmd),
    /// Acceptance-criteria tables.
    #[command(subcommand)]
    Report(ReportCmd),
}

#[derive(Subcommand, Debug)]
enum ComplexCmd {
    /// Level sizes and measure of a complex.
    Stats(Io),
    /// Largest second singular value over link skeletons.
    Gamma(Io),
    /// EPoset parameter per level.
    Eposet(Io),
}

#[derive(Subcommand, Debug)]
enum WalksCmd {
    /// Build a canonical or swap walk on a complex.
    Build(WalkArgs),
}

#[derive(Subcommand, Debug)]
enum SpectraCmd {
    /// Weighted spectrum of a walk on a complex, or of a graph with `--kind graph`.
    Sigma2(WalkArgs),
    /// Kneser spectra, analytic or from the swap walk on a complete complex.
    Kneser(KneserArgs),
    /// Threshold rank of a graph, or the splitting-tree rank of a complex with `--complex`.
    Trank(TrankArgs),
}

#[derive(Subcommand, Debug)]
enum CspCmd {
    /// Exact optimum by enumeration.
    Brute(Io),
    /// Solve the moment relaxation.
    Sdp(SdpArgs),
    /// Solve the relaxation and run propagation rounding trials.
    Round(RoundArgs),
    /// End-to-end pipeline with spectral diagnostics.
    Solve(SolveArgs),
}

#[derive(Subcommand, Debug)]
enum ReportCmd {
    /// Run acceptance criteria (all by default).
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Io {
    /// Input JSON file.
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Output file (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum WalkKind {
    Canonical,
    Swap,
    /// Input is a weighted graph (only for `spectra sigma2`).
    Graph,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    ClosedForm,
    Conditioned,
}

#[derive(Args, Debug)]
pub struct WalkArgs {
    #[command(flatten)]
    pub io: Io,
    #[arg(long, value_enum, default_value_t = WalkKind::Canonical)]
    pub kind: WalkKind,
    /// Source level.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Destination level (defaults to `k`).
    #[arg(long)]
    pub l: Option<usize>,
    /// Ascent height.
    #[arg(long, default_value_t = 1)]
    pub u: usize,
    /// Swapped vertices (swap walks; defaults to `l`).
    #[arg(long)]
    pub j: Option<usize>,
    #[arg(long, value_enum, default_value_t = Method::ClosedForm)]
    pub method: Method,
    /// Tolerance for the stochasticity check of the built walk.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct KneserArgs {
    #[command(flatten)]
    pub io: Io,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    /// Second side of the bipartite graph.
    #[arg(long)]
    pub l: Option<usize>,
    /// Closed-form values instead of a numerical spectrum.
    #[arg(long)]
    pub analytic: bool,
}

#[derive(Args, Debug)]
pub struct TrankArgs {
    #[command(flatten)]
    pub io: Io,
    #[arg(long)]
    pub tau: f64,
    /// Treat the input as a complex and rank its splitting trees.
    #[arg(long)]
    pub complex: bool,
    /// Splitting tree such as `((1,1),(1,1))`; all trees when omitted.
    #[arg(long)]
    pub tree: Option<String>,
}

#[derive(Args, Debug)]
pub struct SdpArgs {
    #[command(flatten)]
    pub io: Io,
    /// Relaxation level (defaults to `k + max(k, 2)`).
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 50_000)]
    pub max_iter: usize,
    /// Write solver diagnostics as JSON lines.
    #[arg(long, value_name = "PATH")]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RoundArgs {
    #[command(flatten)]
    pub sdp: SdpArgs,
    /// Seed budget (multiple of `k`).
    #[arg(long = "L")]
    pub big_l: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Use exactly this many seed faces instead of a uniform draw.
    #[arg(long)]
    pub fixed_m: Option<usize>,
    /// Run split-inequality and variance-decrement checks on every conditioned ensemble.
    #[arg(long)]
    pub checks: bool,
    /// Include every trial in the JSON output.
    #[arg(long)]
    pub per_trial: bool,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub round: RoundArgs,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Criterion id; repeat to select several.
    #[arg(long = "criterion", value_name = "ID")]
    pub criteria: Vec<usize>,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    Validation { kind: String, message: String },
    Numerical { kind: String, message: String },
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> CliError {
        CliError::Validation {
            kind: "invalid".into(),
            message: message.into(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation { .. } => 2,
            CliError::Numerical { .. } => 3,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let (kind, message) = match self {
            CliError::Validation { kind, message } | CliError::Numerical { kind, message } => (kind, message),
        };
        json!({ "error": { "kind": kind, "message": message, "exit_code": self.exit_code() } })
    }
}

impl From<hdxcsp_core::Error> for CliError {
    fn from(e: hdxcsp_core::Error) -> CliError {
        let kind = e.kind().to_string();
        let message = e.to_string();
        match e {
            hdxcsp_core::Error::Numerical(_) | hdxcsp_core::Error::RareEvent { .. } => {
                CliError::Numerical { kind, message }
            }
            _ => CliError::Validation { kind, message },
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> CliError {
        CliError::Validation {
            kind: "json".into(),
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn read_input(io: &Io) -> CliResult<String> {
    let path = io
        .input
        .as_deref()
        .ok_or_else(|| CliError::validation("--in <PATH> is required"))?;
    fs::read_to_string(path).map_err(|e| CliError::Validation {
        kind: "io".into(),
        message: format!("cannot read {}: {e}", path.display()),
    })
}

pub fn write_output(out: Option<&Path>, text: &str) -> CliResult<()> {
    let io_err = |e: io::Error| CliError::Validation {
        kind: "io".into(),
        message: e.to_string(),
    };
    match out {
        Some(path) => fs::write(path, text).map_err(io_err),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(io_err)?;
            stdout.flush().map_err(io_err)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Complex(ComplexCmd::Stats(io)) => commands::complex_stats(&io),
        Command::Complex(ComplexCmd::Gamma(io)) => commands::complex_gamma(&io),
        Command::Complex(ComplexCmd::Eposet(io)) => commands::complex_eposet(&io),
        Command::Walks(WalksCmd::Build(args)) => commands::walks_build(&args),
        Command::Spectra(SpectraCmd::Sigma2(args)) => commands::spectra_sigma2(&args),
        Command::Spectra(SpectraCmd::Kneser(args)) => commands::spectra_kneser(&args),
        Command::Spectra(SpectraCmd::Trank(args)) => commands::spectra_trank(&args),
        Command::Csp(CspCmd::Brute(io)) => commands::csp_brute(&io),
        Command::Csp(CspCmd::Sdp(args)) => commands::csp_sdp(&args),
        Command::Csp(CspCmd::Round(args)) => commands::csp_round(&args),
        Command::Csp(CspCmd::Solve(args)) => commands::csp_solve(&args),
        Command::Report(ReportCmd::Sweep(args)) => commands::report_sweep(&args),
    }
}

fn fail(err: CliError) -> ExitCode {
    eprintln!("{}", err.to_json());
    ExitCode::from(err.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            return fail(CliError::Validation {
                kind: "usage".into(),
                message: e.to_string().trim_end().to_string(),
            })
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
