//! `vlf oracle ...`: reference tables with columns `n, gamma, exact, bound, ratio`.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use vlf_core::bounds::{b_constant, DiscreteLaw};
use vlf_core::channel::{capacity, control_pair, ChannelSpec, Dmc, CAPACITY_TOL};
use vlf_core::oracle::{
    exact_eta_expectation, exact_first_passage, exact_mi_tail, exact_sprt, gaussian_corr_tail,
    gaussian_corr_tail_exact, LatticeWalkSpec,
};
use vlf_core::types::refined_mi_tail_bound;

use crate::commands::need;
use crate::config::{parse_grid, FileConfig};
use crate::csv::{prob, real, Sink};
use crate::OracleVerb;

pub const ORACLE_HEADER: [&str; 5] = ["n", "gamma", "exact", "bound", "ratio"];

const MAX_STEPS: usize = 1_000_000;

#[derive(Args, Debug, Clone)]
pub struct SprtArgs {
    #[arg(long)]
    pub channel: Option<String>,
    /// Symmetric thresholds `a_A = a_R = a`, as a grid.
    #[arg(long, default_value = "2,4,6")]
    pub a: String,
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct MiTailArgs {
    /// Block lengths, as a grid.
    #[arg(long, default_value = "1:14:1")]
    pub n: String,
    #[arg(long, default_value = "0.5:6:0.5")]
    pub gammas: String,
    /// Input and output alphabet sizes (uniform marginals).
    #[arg(long, default_value_t = 2)]
    pub ax: usize,
    #[arg(long, default_value_t = 2)]
    pub ay: usize,
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct EtaArgs {
    #[arg(long, default_value = "100,1000,10000,100000")]
    pub n: String,
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct LordenArgs {
    #[arg(long)]
    pub channel: Option<String>,
    #[arg(long, default_value = "10,20,40")]
    pub gammas: String,
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct CorrTailArgs {
    #[arg(long, default_value = "200")]
    pub n: String,
    /// Correlation thresholds, reported in the `gamma` column.
    #[arg(long, default_value = "0.3")]
    pub a: String,
    #[arg(long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

fn counts(grid: &str, key: &str) -> Result<Vec<u64>> {
    parse_grid(grid)?
        .into_iter()
        .map(|v| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as u64)
            } else {
                bail!("{key}: {v} is not a positive integer")
            }
        })
        .collect()
}

fn dmc_channel(flag: &Option<String>, file: &FileConfig) -> Result<Dmc> {
    let s = need("channel", flag.clone().or_else(|| file.channel.clone()))?;
    match ChannelSpec::parse(&s)? {
        ChannelSpec::Dmc(d) => Ok(d),
        ChannelSpec::Awgn(_) => bail!("channel = {s:?}: this oracle needs a discrete channel"),
    }
}

fn sink(flag: &Option<PathBuf>, file: &FileConfig) -> Result<Sink> {
    Sink::create(flag.clone().or_else(|| file.output.clone()).as_deref(), &ORACLE_HEADER)
}

pub fn run(verb: OracleVerb, file: &FileConfig) -> Result<()> {
    match verb {
        OracleVerb::Sprt(a) => {
            // n: exact E[tau] under H_A; exact: P[reject | H_A] with the
            // unabsorbed mass counted as an error.
            let dmc = dmc_channel(&a.channel, file)?;
            let cp = control_pair(&dmc)?;
            let (law, _) = DiscreteLaw::control_llrs(&dmc, cp.x_accept, cp.x_reject);
            let mut out = sink(&a.output, file)?;
            for t in parse_grid(&a.a)? {
                if !(t > 0.0) {
                    bail!("a = {t}: thresholds must be positive");
                }
                let w = exact_sprt(&LatticeWalkSpec::from_law(&law, -t, t, MAX_STEPS))?;
                let (p, b) = (w.p_reject_upper(), (-t).exp());
                out.row(vec![real(w.expected_steps), real(t), prob(p), prob(b), real(p / b)])?;
            }
            out.flush()
        }
        OracleVerb::MiTail(a) => {
            let gammas = parse_grid(&a.gammas)?;
            let (px, py) = (vec![1.0 / a.ax as f64; a.ax], vec![1.0 / a.ay as f64; a.ay]);
            let mut out = sink(&a.output, file)?;
            for n in counts(&a.n, "n")? {
                let tails = exact_mi_tail(n, &px, &py, &gammas)?;
                for (&g, &p) in gammas.iter().zip(&tails) {
                    let b = refined_mi_tail_bound(n, a.ax, a.ay, g);
                    out.row(vec![n.to_string(), real(g), prob(p), prob(b), real(p / b)])?;
                }
            }
            out.flush()
        }
        OracleVerb::Eta(a) => {
            let mut out = sink(&a.output, file)?;
            for n in counts(&a.n, "n")? {
                let e = exact_eta_expectation(n);
                let b = (std::f64::consts::PI * n as f64 / 2.0).sqrt();
                out.row(vec![n.to_string(), String::new(), real(e), real(b), real(e / b)])?;
            }
            out.flush()
        }
        OracleVerb::Lorden(a) => {
            // n: DP steps evaluated; exact: E[tau]; bound: (gamma + b)/C.
            let dmc = dmc_channel(&a.channel, file)?;
            let (_, px) = capacity(&dmc, CAPACITY_TOL)?;
            let law = DiscreteLaw::information_density(&dmc, &px)?;
            let (c, b) = (law.mean(), b_constant(&law)?);
            let mut out = sink(&a.output, file)?;
            for g in parse_grid(&a.gammas)? {
                let w = exact_first_passage(&law, g, MAX_STEPS)?;
                let bound = (g + b) / c;
                out.row(vec![
                    w.steps_evaluated.to_string(),
                    real(g),
                    real(w.expected_steps),
                    real(bound),
                    real(w.expected_steps / bound),
                ])?;
            }
            out.flush()
        }
        OracleVerb::CorrTail(a) => {
            let mut out = sink(&a.output, file)?;
            for n in counts(&a.n, "n")? {
                for t in parse_grid(&a.a)? {
                    let e = gaussian_corr_tail_exact(n, t)?;
                    let b = gaussian_corr_tail(n, t)?;
                    out.row(vec![n.to_string(), real(t), prob(e), prob(b), real(e / b)])?;
                }
            }
            out.flush()
        }
    }
}
