//! `plaq`: command line access to the plaquette toolkit.

mod commands;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plaquette::Model;

#[derive(Parser, Debug)]
#[command(name = "plaq", version, about = "Exact and sampled computations for plaquette spin models")]
pub struct Cli {
    /// Emit JSON instead of text or CSV.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Infinite-volume (or plus-boundary) multispin correlation of a set.
    Multispin(MultispinArgs),
    /// Minimal decomposition of a set into plaquettes.
    Decompose(DecomposeArgs),
    /// Exact comparison of a decimated measure with the renormalized one.
    RenormCheck(RenormArgs),
    /// Plus-boundary magnetization of the square plaquette model.
    Magnetization(MagnetizationArgs),
    /// Length scales on a beta grid.
    Lengths(LengthsArgs),
    /// Runs a Markov chain from a JSON config and compares with targets.
    McmcValidate(McmcArgs),
    /// Rank and inequality checks on cycle spaces (JSON report).
    CyclesAudit(AuditArgs),
    /// Partition-function ratio over boundary conditions.
    Screening(ScreeningArgs),
    /// Runs the acceptance criteria.
    VerifyAll(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct MultispinArgs {
    #[arg(long)]
    pub model: Model,
    /// Sites as `x1,x2` separated by spaces or `;`, or a JSON list `[[x1,x2],...]`.
    #[arg(long)]
    pub sites: String,
    #[arg(long)]
    pub beta: f64,
    /// Use the plus boundary condition on `[-ELL, ELL]²` (square model).
    #[arg(long)]
    pub plus: Option<u32>,
    /// Evaluate the plus-boundary value by enumeration instead of the cycle expansion.
    #[arg(long, requires = "plus")]
    pub enumerate: bool,
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub model: Model,
    /// Same formats as for `multispin`.
    #[arg(long)]
    pub sites: String,
}

#[derive(Args, Debug)]
pub struct RenormArgs {
    #[arg(long)]
    pub model: Model,
    /// Decimation step; a power of two for the triangular model.
    #[arg(long)]
    pub ell: u32,
    /// Coarse region size.
    #[arg(long, default_value_t = 1)]
    pub big_n: u32,
    /// Comma-separated inverse temperatures.
    #[arg(long, default_value = "0.5,1,2")]
    pub betas: String,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct MagnetizationArgs {
    /// Comma-separated inverse temperatures.
    #[arg(long)]
    pub beta: String,
    #[arg(long, conflicts_with = "scan")]
    pub ell: Option<u64>,
    /// Scan an `ℓ` grid and write CSV `beta,ell,value`.
    #[arg(long)]
    pub scan: bool,
    /// Grid as `a..=b`, `a..b` or a comma list.
    #[arg(long, default_value = "1..=32")]
    pub ells: String,
    /// Report the first grid `ℓ` below this value.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Args, Debug)]
pub struct LengthsArgs {
    #[arg(long)]
    pub model: Model,
    #[arg(long, default_value_t = 6.0)]
    pub from: f64,
    #[arg(long, default_value_t = 20.0)]
    pub to: f64,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    /// Also write the `ln ℓ` series and fitted slopes as JSON to this file.
    #[arg(long)]
    pub emit_plotdata: Option<PathBuf>,
    /// Also estimate the sampled lengths (cavity, mixing) at these betas.
    #[arg(long)]
    pub sampled: Option<String>,
    /// Seed for the sampled lengths (required with `--sampled`).
    #[arg(long, requires = "sampled")]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct McmcArgs {
    /// JSON config (`-` reads stdin).
    pub config: PathBuf,
    /// Write the per-sweep series as CSV to this file.
    #[arg(long)]
    pub series: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    /// Largest triangle order for the rank and bottom-row checks.
    #[arg(long, default_value_t = 10)]
    pub max_n: u32,
    /// Largest order for the exhaustive inequality check.
    #[arg(long, default_value_t = 8)]
    pub max_economic: u32,
    /// Values of `t = tanh(β/2)` for the weighted cycle-sum bound.
    #[arg(long, default_value = "0.1,0.5,0.9")]
    pub t: String,
}

#[derive(Args, Debug)]
pub struct ScreeningArgs {
    #[arg(long)]
    pub model: Model,
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub beta: f64,
    /// `exhaustive` or `declared:K`.
    #[arg(long, default_value = "exhaustive")]
    pub family: String,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Shorter Monte Carlo runs.
    #[arg(long)]
    pub quick: bool,
    /// Seed for the stochastic criteria (the test suite uses 2024).
    #[arg(long)]
    pub seed: u64,
    /// Run a single criterion.
    #[arg(long)]
    pub criterion: Option<u8>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        let io = c.downcast_ref::<std::io::Error>().or_else(|| match c.downcast_ref::<csv::Error>()?.kind() {
            csv::ErrorKind::Io(io) => Some(io),
            _ => None,
        });
        io.is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}
