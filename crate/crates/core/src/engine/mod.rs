//! Monte-Carlo simulation of the three-phase protocol: a communication
//! phase (C1), a sequential hypothesis test (HT) and a second communication
//! phase (C2), with the option of stopping at time zero.
//!
//! Codebooks are drawn fresh for every trial. Up to `explicit_limit`
//! messages every codeword is simulated. Beyond that, wrong codewords are
//! represented only through the ones that cross the first threshold, which
//! form (up to a Poisson approximation of the binomial count) a Poisson
//! process. The process is drawn by thinning proposals from a tilted law.

mod link;
mod sprt;
mod stats;
mod training;
mod trial;

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use sprt::{sprt, SprtDecision, SprtOutcome};
pub use stats::{McEstimate, MeanCi, PassageEstimate};
pub use training::EmpiricalChannel;

use crate::bounds::{BoundError, VlfParams};
use crate::channel::{control_pair, ChannelError, Dmc, GaussianChannel, InputDist};
use link::{KnownAwgn, KnownDmc, Link, UniversalAwgn, UniversalBsc, UniversalDmc};
use stats::Aggregator;
use trial::{run_trial, TrialSpec};

/// Default number of messages up to which codebooks are simulated in full.
pub const DEFAULT_EXPLICIT_LIMIT: u64 = 4096;
/// Default horizon is this many multiples of `gamma2 / C`.
pub const DEFAULT_HORIZON_FACTOR: f64 = 50.0;
/// Smallest horizon accepted, in multiples of `gamma2 / C`.
pub const MIN_HORIZON_FACTOR: f64 = 10.0;
/// RNG stream reserved for the training sequence.
pub const TRAINING_STREAM: u64 = u64::MAX;
const CHUNK: u64 = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training sequence too short: need at least {needed}, got {got}")]
    InsufficientTraining { needed: u64, got: u64 },
    #[error("horizon exceeded after {steps} steps")]
    HorizonExceeded { steps: u64 },
    #[error("LLR stream ended after {steps} steps")]
    StreamEnded { steps: u64 },
    #[error("sampled codebook route unavailable: {0}")]
    SamplerUnsupported(String),
    #[error("sampled codebook needs {mean:e} proposals per window; lower M or raise the thresholds")]
    SamplerOverload { mean: f64 },
    #[error("at least one trial is required")]
    NoTrials,
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Bound(#[from] BoundError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Known DMC, information-density metric.
    VlfDmc,
    /// Unknown DMC, empirical mutual information metric.
    UvlfDmc,
    /// Unknown binary channel, flip-count metric.
    UvlfBsc,
    /// Known Gaussian channel.
    VlfAwgn,
    /// Unknown Gaussian noise level, correlation metric.
    UvlfAwgn,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Self::VlfDmc, Self::UvlfDmc, Self::UvlfBsc, Self::VlfAwgn, Self::UvlfAwgn];

    pub fn name(&self) -> &'static str {
        match self {
            Self::VlfDmc => "vlf_dmc",
            Self::UvlfDmc => "uvlf_dmc",
            Self::UvlfBsc => "uvlf_bsc",
            Self::VlfAwgn => "vlf_awgn",
            Self::UvlfAwgn => "uvlf_awgn",
        }
    }

    pub fn is_universal(&self) -> bool {
        matches!(self, Self::UvlfDmc | Self::UvlfBsc | Self::UvlfAwgn)
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, Self::VlfAwgn | Self::UvlfAwgn)
    }
}

impl FromStr for Variant {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| EngineError::InvalidConfig(format!("unknown variant '{s}'")))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeChannel {
    /// A DMC and the distribution codewords are drawn from.
    Dmc { dmc: Dmc, px: InputDist },
    /// Codewords are i.i.d. `N(0, P)` with `P` the channel's power.
    Gaussian(GaussianChannel),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookRoute {
    /// Explicit when `M <= explicit_limit` and `M` is an integer, sampled
    /// otherwise.
    #[default]
    Auto,
    Explicit,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeConfig {
    pub variant: Variant,
    pub channel: SchemeChannel,
    pub params: VlfParams,
    /// Training length `ℓ`; only used by the universal variants.
    pub training_len: u64,
    /// Horizon; defaults to `50 gamma2 / C` with `C` estimated for the
    /// universal variants.
    pub n_max: Option<u64>,
    pub seed: u64,
    /// Time-zero stops decode the true message with probability `1/M`
    /// instead of always erring.
    pub honest_time_zero: bool,
    pub route: CodebookRoute,
    pub explicit_limit: u64,
}

impl SchemeConfig {
    pub fn new(variant: Variant, channel: SchemeChannel, params: VlfParams, seed: u64) -> Self {
        Self {
            variant,
            channel,
            params,
            training_len: 0,
            n_max: None,
            seed,
            honest_time_zero: false,
            route: CodebookRoute::Auto,
            explicit_limit: DEFAULT_EXPLICIT_LIMIT,
        }
    }
}

/// Result of one trial. `tau` is the total number of channel uses
/// (`len_c1 + len_ht + len_c2`), zero for a time-zero stop and the horizon
/// for a censored trial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub correct: bool,
    pub tau: u64,
    pub len_c1: u64,
    pub len_ht: u64,
    pub len_c2: u64,
    pub energy: f64,
    pub censored: bool,
    pub stopped_at_zero: bool,
    pub entered_c2: bool,
}

#[derive(Debug, Clone)]
enum AnyLink {
    KnownDmc(KnownDmc),
    UniversalDmc(UniversalDmc),
    UniversalBsc(UniversalBsc),
    KnownAwgn(KnownAwgn),
    UniversalAwgn(UniversalAwgn),
}

macro_rules! with_link {
    ($link:expr, $l:ident => $body:expr) => {
        match $link {
            AnyLink::KnownDmc($l) => $body,
            AnyLink::UniversalDmc($l) => $body,
            AnyLink::UniversalBsc($l) => $body,
            AnyLink::KnownAwgn($l) => $body,
            AnyLink::UniversalAwgn($l) => $body,
        }
    };
}

/// Validated configuration with its shared read-only state: the training
/// estimate, the resolved horizon and codebook route.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: SchemeConfig,
    link: AnyLink,
    empirical: Option<EmpiricalChannel>,
    capacity: f64,
    spec: TrialSpec,
}

fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Estimates the channel from a training sequence of length
/// `cfg.training_len`, drawn from the run's reserved RNG stream.
pub fn estimate_channel(cfg: &SchemeConfig) -> Result<EmpiricalChannel, EngineError> {
    training::train(&cfg.channel, cfg.training_len, &mut trial_rng(cfg.seed, TRAINING_STREAM))
}

impl Simulator {
    pub fn new(cfg: SchemeConfig) -> Result<Self, EngineError> {
        cfg.params.validate()?;
        let bad = |m: String| Err(EngineError::InvalidConfig(m));
        let empirical = if cfg.variant.is_universal() { Some(estimate_channel(&cfg)?) } else { None };
        let (link, capacity) = match (&cfg.channel, cfg.variant) {
            (SchemeChannel::Dmc { dmc, px }, v @ (Variant::VlfDmc | Variant::UvlfDmc | Variant::UvlfBsc)) => {
                if px.len() != dmc.input_size() {
                    return bad(format!("input distribution has {} entries for {} inputs", px.len(), dmc.input_size()));
                }
                if px.probs().iter().any(|&p| p <= 0.0) {
                    return bad("every input needs positive probability".into());
                }
                match (v, &empirical) {
                    (Variant::VlfDmc, _) => {
                        let cp = control_pair(dmc)?;
                        (AnyLink::KnownDmc(KnownDmc::new(dmc, px, cp.x_accept, cp.x_reject)?), dmc.mutual_information(px)?)
                    }
                    (_, Some(est @ EmpiricalChannel::Dmc { rows, .. })) => {
                        let cp = est.control_pair().ok_or_else(|| EngineError::InvalidConfig("control pair needs two inputs".into()))?;
                        let c = est.capacity_estimate(Some(px), 0.0);
                        if v == Variant::UvlfBsc {
                            if dmc.input_size() != 2 || dmc.output_size() != 2 || !px.is_uniform() {
                                return bad("uvlf_bsc needs a binary channel and a uniform input".into());
                            }
                            (AnyLink::UniversalBsc(UniversalBsc::new(dmc, rows, cp.x_accept, cp.x_reject)), c)
                        } else {
                            (AnyLink::UniversalDmc(UniversalDmc::new(dmc, px, rows, cp.x_accept, cp.x_reject)), c)
                        }
                    }
                    _ => unreachable!("universal variants are trained"),
                }
            }
            (SchemeChannel::Gaussian(chan), Variant::VlfAwgn) => (AnyLink::KnownAwgn(KnownAwgn::new(*chan)), chan.capacity()),
            (SchemeChannel::Gaussian(chan), Variant::UvlfAwgn) => {
                let Some(est @ EmpiricalChannel::Gaussian { noise_var, .. }) = &empirical else {
                    unreachable!("universal variants are trained")
                };
                (AnyLink::UniversalAwgn(UniversalAwgn::new(*chan, *noise_var)), est.capacity_estimate(None, chan.power))
            }
            (_, v) => return bad(format!("variant {v} does not match the channel kind")),
        };

        let gamma2 = cfg.params.gamma2;
        let n_max = match cfg.n_max {
            Some(n) => {
                if capacity > 0.0 && (n as f64) < MIN_HORIZON_FACTOR * gamma2 / capacity {
                    return bad(format!(
                        "n_max = {n} is below {MIN_HORIZON_FACTOR} gamma2 / C = {:.1}",
                        MIN_HORIZON_FACTOR * gamma2 / capacity
                    ));
                }
                n
            }
            None => {
                if !(capacity > 0.0) {
                    return bad("capacity (estimate) is zero; set n_max explicitly".into());
                }
                (DEFAULT_HORIZON_FACTOR * gamma2 / capacity).ceil() as u64
            }
        };

        let log_m = cfg.params.log_m;
        let m_real = log_m.exp();
        let integer_m = m_real.round();
        let is_integer = (integer_m.ln() - log_m).abs() <= 1e-9;
        let small = m_real <= cfg.explicit_limit as f64 * (1.0 + 1e-12);
        let can_sample = with_link!(&link, l => l.can_sample());
        let explicit = match cfg.route {
            CodebookRoute::Explicit => {
                if !(small && is_integer) {
                    return bad(format!(
                        "explicit codebooks need an integer M <= {} (got ln M = {log_m})",
                        cfg.explicit_limit
                    ));
                }
                Some(integer_m as usize)
            }
            CodebookRoute::Sampled => {
                if !can_sample {
                    return Err(EngineError::SamplerUnsupported(format!("variant {}", cfg.variant)));
                }
                None
            }
            CodebookRoute::Auto => {
                if small && is_integer {
                    Some(integer_m as usize)
                } else if can_sample {
                    None
                } else {
                    return Err(EngineError::SamplerUnsupported(format!(
                        "variant {} with ln M = {log_m} needs an integer M <= {}",
                        cfg.variant, cfg.explicit_limit
                    )));
                }
            }
        };

        let p = cfg.params;
        let spec = TrialSpec {
            gamma1: p.gamma1,
            gamma2: p.gamma2,
            a_accept: p.a_accept,
            a_reject: p.a_reject,
            eps0: p.eps0,
            log_m,
            log_m_minus_one: p.log_m_minus_one(),
            n_max,
            honest_time_zero: cfg.honest_time_zero,
            explicit,
        };
        Ok(Self { cfg, link, empirical, capacity, spec })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn n_max(&self) -> u64 {
        self.spec.n_max
    }

    /// Training estimate (universal variants only).
    pub fn empirical(&self) -> Option<&EmpiricalChannel> {
        self.empirical.as_ref()
    }

    /// Capacity of the channel (known variants) or of its estimate.
    pub fn capacity_estimate(&self) -> f64 {
        self.capacity
    }

    /// Number of simulated codewords, or `None` for the sampled route.
    pub fn explicit_m(&self) -> Option<usize> {
        self.spec.explicit
    }

    /// Runs trial `index` on RNG stream `index` of the configured seed.
    pub fn trial(&self, index: u64) -> Result<TrialOutcome, EngineError> {
        let mut rng = trial_rng(self.cfg.seed, index);
        with_link!(&self.link, l => run_trial(l, &self.spec, &mut rng))
    }

    pub fn run(&self, trials: u64, workers: usize) -> Result<McEstimate, EngineError> {
        self.run_with(trials, workers, |_, _| {})
    }

    /// Runs trials `0..trials` on `workers` threads (0 = all cores) and
    /// hands every outcome to `visit` in index order.
    pub fn run_with<F>(&self, trials: u64, workers: usize, mut visit: F) -> Result<McEstimate, EngineError>
    where
        F: FnMut(u64, &TrialOutcome),
    {
        if trials == 0 {
            return Err(EngineError::NoTrials);
        }
        let power = match self.cfg.channel {
            SchemeChannel::Gaussian(c) => Some(c.power),
            SchemeChannel::Dmc { .. } => None,
        };
        let mut agg = Aggregator::new(power);
        let pool = pool(workers)?;
        let mut start = 0;
        while start < trials {
            let end = (start + CHUNK).min(trials);
            let chunk: Vec<Result<TrialOutcome, EngineError>> =
                pool.install(|| (start..end).into_par_iter().map(|i| self.trial(i)).collect());
            for (i, out) in (start..end).zip(chunk) {
                let out = out?;
                visit(i, &out);
                agg.push(&out);
            }
            start = end;
        }
        Ok(agg.finish())
    }

    /// First time the true message's metric exceeds `gamma`, over `trials`
    /// independent channel realisations (no codebook, no other phases).
    pub fn passage_time(&self, gamma: f64, trials: u64, workers: usize) -> Result<PassageEstimate, EngineError> {
        if trials == 0 {
            return Err(EngineError::NoTrials);
        }
        let n_max = self.spec.n_max;
        let one = |i: u64| -> Option<u64> {
            let mut rng = trial_rng(self.cfg.seed, i);
            with_link!(&self.link, l => passage(l, gamma, n_max, &mut rng))
        };
        let pool = pool(workers)?;
        let mut times = Vec::with_capacity(trials as usize);
        let mut start = 0;
        while start < trials {
            let end = (start + CHUNK).min(trials);
            let chunk: Vec<Option<u64>> = pool.install(|| (start..end).into_par_iter().map(one).collect());
            times.extend(chunk);
            start = end;
        }
        Ok(PassageEstimate::from_times(&times, n_max))
    }
}

fn passage<L: Link, R: Rng>(link: &L, gamma: f64, n_max: u64, rng: &mut R) -> Option<u64> {
    let mut s = link.fresh();
    for n in 1..=n_max {
        let x = link.draw_input(rng);
        let y = link.channel(x, rng);
        if link.advance(&mut s, x, y) > gamma {
            return Some(n);
        }
    }
    None
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, EngineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| EngineError::ThreadPool(e.to_string()))
}

/// Builds the simulator and runs a single trial.
pub fn simulate_trial(cfg: &SchemeConfig, trial_index: u64) -> Result<TrialOutcome, EngineError> {
    Simulator::new(cfg.clone())?.trial(trial_index)
}

pub fn run_monte_carlo(cfg: &SchemeConfig, trials: u64, workers: usize) -> Result<McEstimate, EngineError> {
    Simulator::new(cfg.clone())?.run(trials, workers)
}

#[cfg(test)]
mod tests;
