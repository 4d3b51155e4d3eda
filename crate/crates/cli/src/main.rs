//! `vlf`: bounds, parameter optimization, Monte-Carlo simulation, sweeps and
//! oracle tables for variable-length feedback codes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod csv;
mod oracle;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vlf_core::bounds::BoundError;
use vlf_core::engine::EngineError;

#[derive(Parser, Debug)]
#[command(name = "vlf", version, about = "Variable-length feedback coding: bounds, simulation and oracles")]
struct Cli {
    /// Flat TOML file of defaults; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Evaluate the achievability bound at given or scheduled thresholds.
    Bound(BoundArgs),
    /// Maximize log M at a target error and average length.
    Optimize(OptimizeArgs),
    /// Monte-Carlo simulation of one scheme variant.
    Simulate(SimulateArgs),
    /// Rate curves over a grid of average lengths.
    Sweep(SweepArgs),
    /// Exact and closed-form reference tables.
    #[command(subcommand)]
    Oracle(OracleVerb),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// `bsc:<p>`, `dmc:<matrix file>` or `awgn:<snr>`.
    #[arg(long)]
    pub channel: Option<String>,
    /// Target error probability.
    #[arg(long)]
    pub eps: Option<f64>,
    /// CSV destination; stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Thresholds {
    #[arg(long)]
    pub gamma1: Option<f64>,
    #[arg(long)]
    pub gamma2: Option<f64>,
    #[arg(long = "aA")]
    pub a_accept: Option<f64>,
    #[arg(long = "aR")]
    pub a_reject: Option<f64>,
    #[arg(long)]
    pub eps0: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct BoundArgs {
    #[command(flatten)]
    pub common: Common,
    /// Message set size: `2^k`, `e^x` or a number.
    #[arg(long = "M")]
    pub m: Option<String>,
    /// `manual` (thresholds from flags), `thm2` (known-channel) or `thm3` (universal).
    #[arg(long)]
    pub schedule: Option<String>,
    #[command(flatten)]
    pub thresholds: Thresholds,
    /// Picks the universal metric family for `thm3`.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Target average length.
    #[arg(long = "N")]
    pub n: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long = "M")]
    pub m: Option<String>,
    /// Average length, used by `--schedule optimize`.
    #[arg(long = "N")]
    pub n: Option<String>,
    /// `thm2`, `thm3`, `optimize` or `manual`.
    #[arg(long)]
    pub schedule: Option<String>,
    #[command(flatten)]
    pub thresholds: Thresholds,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Required: every random draw derives from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Training length for the universal variants.
    #[arg(long)]
    pub training: Option<u64>,
    #[arg(long)]
    pub n_max: Option<u64>,
    /// Horizon as a multiple of `gamma2 / C`.
    #[arg(long)]
    pub horizon_factor: Option<f64>,
    /// `auto`, `explicit` or `sampled`.
    #[arg(long)]
    pub route: Option<String>,
    #[arg(long)]
    pub explicit_limit: Option<u64>,
    /// Codeword input distribution for DMCs: `capacity` or `uniform`.
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub honest_time_zero: bool,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Per-trial JSON-lines dump.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// `start:stop:step` or a comma list.
    #[arg(long = "N")]
    pub n: Option<String>,
    /// Comma list of `thm1`, `vlsf`, `converse`.
    #[arg(long)]
    pub schemes: Option<String>,
    /// Keep rows already in `--output` and compute only the missing ones.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Subcommand, Debug)]
pub enum OracleVerb {
    /// Exact SPRT false-reject probability on the control pair.
    Sprt(oracle::SprtArgs),
    /// Exact empirical-MI tail under independence.
    MiTail(oracle::MiTailArgs),
    /// Exact `sum_i C(n,i) e^{-n h(i/n)}` against `sqrt(pi n / 2)`.
    Eta(oracle::EtaArgs),
    /// Exact mean first-passage time against Lorden's bound.
    Lorden(oracle::LordenArgs),
    /// Exact correlation-coefficient tail against its asymptotic form.
    CorrTail(oracle::CorrTailArgs),
}

/// 2 for infeasible targets, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let infeasible = |b: &BoundError| {
        matches!(b, BoundError::Infeasible { .. } | BoundError::HorizonTooSmall(_) | BoundError::EpsTooSmall { .. })
    };
    for cause in err.chain() {
        if let Some(b) = cause.downcast_ref::<BoundError>() {
            if infeasible(b) {
                return 2;
            }
        }
        if let Some(EngineError::Bound(b)) = cause.downcast_ref::<EngineError>() {
            if infeasible(b) {
                return 2;
            }
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap would use 2 for usage errors, which is reserved here
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = config::FileConfig::load(cli.config.as_deref()).and_then(|file| match cli.verb {
        Verb::Bound(a) => commands::bound(a, &file),
        Verb::Optimize(a) => commands::optimize(a, &file),
        Verb::Simulate(a) => commands::simulate(a, &file),
        Verb::Sweep(a) => commands::sweep(a, &file),
        Verb::Oracle(v) => oracle::run(v, &file),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            let kind = if code == 2 { "infeasible" } else { "error" };
            eprintln!("{kind}: {e:#}");
            ExitCode::from(code)
        }
    }
}
