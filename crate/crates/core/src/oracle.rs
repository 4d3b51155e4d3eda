//! Exact and high-precision reference computations used to validate the
//! bounds and the simulator: lattice dynamic programs for sequential tests
//! and first-passage times, exhaustive type enumeration, ladder-height
//! series and Gaussian correlation tails.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::Serialize;
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::bounds::DiscreteLaw;
use crate::channel::binary_entropy;
use crate::numeric::{ln_binomial, ln_multinomial, Z_95};
use crate::types::n_times_mi;

/// Mass below which a dynamic program stops iterating.
pub const MASS_TOL: f64 = 1e-12;
/// Upper limit on live lattice states or enumerated types.
pub const STATE_LIMIT: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("state space exceeds {limit} entries ({found})")]
    StateExplosion { limit: usize, found: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("tail prefactor undefined: 1 - 4 lambda^2 = {0} <= 0")]
    PrefactorUndefined(f64),
}

/// Random walk with finitely supported i.i.d. increments absorbed when it
/// leaves `[lower, upper]`. Use `lower = -inf` for a one-sided passage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeWalkSpec {
    pub steps: Vec<f64>,
    pub probs: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    pub max_steps: usize,
}

impl LatticeWalkSpec {
    pub fn from_law(law: &DiscreteLaw, lower: f64, upper: f64, max_steps: usize) -> Self {
        Self { steps: law.values.clone(), probs: law.probs.clone(), lower, upper, max_steps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WalkExact {
    /// Probability of exiting above `upper`.
    pub p_accept: f64,
    /// Probability of exiting below `lower`.
    pub p_reject: f64,
    /// `sum_n P[tau > n]` over the evaluated horizon.
    pub expected_steps: f64,
    /// Mass still inside the interval when iteration stopped.
    pub residual_mass: f64,
    pub steps_evaluated: usize,
}

impl WalkExact {
    /// `p_accept` with the residual mass counted against it.
    pub fn p_accept_upper(&self) -> f64 {
        self.p_accept + self.residual_mass
    }

    pub fn p_reject_upper(&self) -> f64 {
        self.p_reject + self.residual_mass
    }
}

fn lattice_key(v: f64) -> i64 {
    (v * 1e12).round() as i64
}

/// Exit probabilities and mean exit time of a lattice walk, exact up to the
/// residual mass (iteration stops once it drops below [`MASS_TOL`]).
/// Exit rule: accept once the sum exceeds `upper`, reject once it drops
/// below `lower`.
pub fn exact_sprt(spec: &LatticeWalkSpec) -> Result<WalkExact, OracleError> {
    if spec.steps.len() != spec.probs.len() || spec.steps.is_empty() {
        return Err(OracleError::InvalidInput("steps and probs must be non-empty and of equal length".into()));
    }
    if !(spec.upper > 0.0) || !(spec.lower < 0.0) {
        return Err(OracleError::InvalidInput("need lower < 0 < upper".into()));
    }
    let mut live: HashMap<i64, (f64, f64)> = HashMap::new();
    live.insert(0, (0.0, 1.0));
    let (mut acc, mut rej, mut expected) = (0.0, 0.0, 0.0);
    let mut steps = 0;
    let mut residual = 1.0;
    while residual > MASS_TOL && steps < spec.max_steps {
        expected += residual;
        let mut next: HashMap<i64, (f64, f64)> = HashMap::with_capacity(live.len() * 2);
        for &(v, m) in live.values() {
            for (&s, &p) in spec.steps.iter().zip(&spec.probs) {
                let w = v + s;
                let mass = m * p;
                if w > spec.upper {
                    acc += mass;
                } else if w < spec.lower {
                    rej += mass;
                } else {
                    let e = next.entry(lattice_key(w)).or_insert((w, 0.0));
                    e.1 += mass;
                }
            }
        }
        if next.len() > STATE_LIMIT {
            return Err(OracleError::StateExplosion { limit: STATE_LIMIT, found: next.len() as f64 });
        }
        live = next;
        residual = live.values().map(|e| e.1).sum();
        steps += 1;
    }
    Ok(WalkExact { p_accept: acc, p_reject: rej, expected_steps: expected, residual_mass: residual, steps_evaluated: steps })
}

/// Mean first time a walk with positive drift exceeds `gamma`.
pub fn exact_first_passage(law: &DiscreteLaw, gamma: f64, max_steps: usize) -> Result<WalkExact, OracleError> {
    exact_sprt(&LatticeWalkSpec::from_law(law, f64::NEG_INFINITY, gamma, max_steps))
}

/// Exact `P[n I(P_{x^n y^n}) >= gamma]` for independent `X^n ~ P_X`,
/// `Y^n ~ P_Y`, by enumerating joint types.
pub fn exact_mi_tail(n: u64, px: &[f64], py: &[f64], gammas: &[f64]) -> Result<Vec<f64>, OracleError> {
    let (ax, ay) = (px.len(), py.len());
    if ax == 0 || ay == 0 || n == 0 {
        return Err(OracleError::InvalidInput("empty alphabet or n = 0".into()));
    }
    let cells = ax * ay;
    let count = (ln_binomial(n + cells as u64 - 1, cells as u64 - 1)).exp();
    if count > STATE_LIMIT as f64 {
        return Err(OracleError::StateExplosion { limit: STATE_LIMIT, found: count });
    }
    let log_cell: Vec<f64> = (0..cells).map(|i| (px[i / ay] * py[i % ay]).ln()).collect();
    let mut tails = vec![0.0; gammas.len()];
    let mut counts = vec![0u64; cells];
    let mut visit = |c: &[u64]| {
        let mut rows = vec![0u64; ax];
        let mut cols = vec![0u64; ay];
        let mut logp = ln_multinomial(c);
        for (i, &k) in c.iter().enumerate() {
            rows[i / ay] += k;
            cols[i % ay] += k;
            if k > 0 {
                logp += k as f64 * log_cell[i];
            }
        }
        let score = n_times_mi(c, &rows, &cols, ay);
        let p = logp.exp();
        for (t, &g) in tails.iter_mut().zip(gammas) {
            if score >= g - 1e-12 * g.abs().max(1.0) {
                *t += p;
            }
        }
    };
    compositions(n, 0, &mut counts, &mut visit);
    Ok(tails.into_iter().map(|t| t.min(1.0)).collect())
}

fn compositions<F: FnMut(&[u64])>(remaining: u64, idx: usize, buf: &mut Vec<u64>, f: &mut F) {
    if idx + 1 == buf.len() {
        buf[idx] = remaining;
        f(buf);
        return;
    }
    for k in 0..=remaining {
        buf[idx] = k;
        compositions(remaining - k, idx + 1, buf, f);
    }
}

/// `sum_{i=0}^{n} C(n, i) e^{-n h_b(i/n)}`, which grows like `sqrt(pi n / 2)`.
pub fn exact_eta_expectation(n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let nf = n as f64;
    (0..=n)
        .map(|i| (ln_binomial(n, i) - nf * binary_entropy(i as f64 / nf)).exp())
        .sum()
}

/// Monte-Carlo estimate of `rho = E[S_+^2] / (2 E[S_+])`, where `S_+` is the
/// first strictly positive partial sum of the walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OvershootEstimate {
    pub rho: f64,
    pub ci: (f64, f64),
    pub mean_ladder_height: f64,
    pub samples: u64,
}

pub fn renewal_overshoot<R: Rng>(law: &DiscreteLaw, samples: u64, rng: &mut R) -> Result<OvershootEstimate, OracleError> {
    if !(law.mean() > 0.0) {
        return Err(OracleError::InvalidInput("increment mean must be positive".into()));
    }
    if samples < 2 {
        return Err(OracleError::InvalidInput("need at least two samples".into()));
    }
    let cdf: Vec<f64> = law
        .probs
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let draw = |rng: &mut R| {
        let u: f64 = rng.random();
        let i = cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1);
        law.values[i]
    };
    let (mut s1, mut s2, mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..samples {
        let mut s = 0.0;
        while s <= 0.0 {
            s += draw(rng);
        }
        let h2 = s * s;
        s1 += s;
        s2 += h2;
        s11 += s * s;
        s12 += s * h2;
        s22 += h2 * h2;
    }
    let n = samples as f64;
    let (m1, m2) = (s1 / n, s2 / n);
    let (v11, v12, v22) = (s11 / n - m1 * m1, s12 / n - m1 * m2, s22 / n - m2 * m2);
    let rho = m2 / (2.0 * m1);
    // Delta method for the ratio m2 / (2 m1).
    let (g1, g2) = (-m2 / (2.0 * m1 * m1), 1.0 / (2.0 * m1));
    let var = (g1 * g1 * v11 + 2.0 * g1 * g2 * v12 + g2 * g2 * v22) / n;
    let half = Z_95 * var.max(0.0).sqrt();
    Ok(OvershootEstimate { rho, ci: (rho - half, rho + half), mean_ladder_height: m1, samples })
}

/// `rho = E[X^2] / (2 E[X]) - sum_{k >= 1} E[S_k^-] / k`, summed until the
/// terms fall below `1e-16` relative to the leading term.
pub fn ladder_overshoot_series(law: &DiscreteLaw) -> Result<f64, OracleError> {
    let mean = law.mean();
    if !(mean > 0.0) {
        return Err(OracleError::InvalidInput("increment mean must be positive".into()));
    }
    let lead = law.second_moment() / (2.0 * mean);
    let mut dist: HashMap<i64, (f64, f64)> = HashMap::new();
    dist.insert(0, (0.0, 1.0));
    let mut correction = 0.0;
    for k in 1..=100_000usize {
        let mut next: HashMap<i64, (f64, f64)> = HashMap::with_capacity(dist.len() * 2);
        for &(v, m) in dist.values() {
            for (&s, &p) in law.values.iter().zip(&law.probs) {
                let w = v + s;
                let e = next.entry(lattice_key(w)).or_insert((w, 0.0));
                e.1 += m * p;
            }
        }
        // Atoms with negligible mass cannot affect the sum at double precision.
        next.retain(|_, e| e.1 > 1e-300);
        if next.len() > STATE_LIMIT {
            return Err(OracleError::StateExplosion { limit: STATE_LIMIT, found: next.len() as f64 });
        }
        dist = next;
        let neg: f64 = dist.values().filter(|e| e.0 < 0.0).map(|e| -e.0 * e.1).sum();
        let term = neg / k as f64;
        correction += term;
        if k > 10 && term < 1e-16 * lead {
            return Ok(lead - correction);
        }
    }
    Err(OracleError::InvalidInput("series did not converge".into()))
}

/// Large-deviation approximation of `P[rho_hat >= a]` for the uncentered
/// correlation of `n` independent Gaussian pairs:
/// `(1 - 4 lambda^2)^{-1/4} / (lambda sigma sqrt(n)) * exp((n/2) ln(1 - a^2))`
/// with `lambda = a / (1 - a^2)` and `sigma = (1 - a^2) / sqrt(1 + a^2)`.
pub fn gaussian_corr_tail(n: u64, a: f64) -> Result<f64, OracleError> {
    if !(a > 0.0 && a < 1.0) || n == 0 {
        return Err(OracleError::InvalidInput(format!("need 0 < a < 1 and n > 0, got a = {a}, n = {n}")));
    }
    let lambda = a / (1.0 - a * a);
    let sigma = (1.0 - a * a) / (1.0 + a * a).sqrt();
    let disc = 1.0 - 4.0 * lambda * lambda;
    if disc <= 0.0 {
        return Err(OracleError::PrefactorUndefined(disc));
    }
    let nf = n as f64;
    Ok(disc.powf(-0.25) / (lambda * sigma * nf.sqrt()) * (0.5 * nf * (1.0 - a * a).ln()).exp())
}

/// Leading-order tail from the exact Beta law:
/// `(1 - a^2)^{(n-1)/2} / (a sqrt(2 pi n))`.
pub fn gaussian_corr_tail_leading(n: u64, a: f64) -> Result<f64, OracleError> {
    if !(a > 0.0 && a < 1.0) || n < 2 {
        return Err(OracleError::InvalidInput(format!("need 0 < a < 1 and n >= 2, got a = {a}, n = {n}")));
    }
    let nf = n as f64;
    Ok((0.5 * (nf - 1.0) * (1.0 - a * a).ln()).exp() / (a * (2.0 * std::f64::consts::PI * nf).sqrt()))
}

/// Exact `P[rho_hat >= a]`: under independence `rho_hat^2 ~ Beta(1/2, (n-1)/2)`,
/// so the tail is `I_{1-a^2}((n-1)/2, 1/2) / 2`.
pub fn gaussian_corr_tail_exact(n: u64, a: f64) -> Result<f64, OracleError> {
    if !(a > 0.0 && a < 1.0) || n < 2 {
        return Err(OracleError::InvalidInput(format!("need 0 < a < 1 and n >= 2, got a = {a}, n = {n}")));
    }
    Ok(0.5 * beta_reg((n as f64 - 1.0) / 2.0, 0.5, 1.0 - a * a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub p_hat: f64,
    pub se: f64,
    pub hits: u64,
    pub samples: u64,
}

/// Monte-Carlo tail of `rho_hat` for `n` i.i.d. standard Gaussian pairs.
///
/// By rotation invariance, conditional on `x^n` the statistic is distributed
/// as the first coordinate of a uniform point on the sphere, i.e.
/// `Z / sqrt(Z^2 + chi^2_{n-1})`; each sample costs two draws.
pub fn gaussian_corr_tail_mc<R: Rng>(n: u64, a: f64, samples: u64, rng: &mut R) -> Result<TailEstimate, OracleError> {
    if n < 2 || samples == 0 {
        return Err(OracleError::InvalidInput("need n >= 2 and samples > 0".into()));
    }
    let chi = ChiSquared::new(n as f64 - 1.0).map_err(|e| OracleError::InvalidInput(e.to_string()))?;
    let mut hits = 0u64;
    for _ in 0..samples {
        let z: f64 = StandardNormal.sample(rng);
        if z <= 0.0 {
            continue;
        }
        let rest = chi.sample(rng);
        if z / (z * z + rest).sqrt() >= a {
            hits += 1;
        }
    }
    Ok(tail_estimate(hits, samples))
}

/// Same tail by drawing full Gaussian vectors; slower, used to validate the
/// reduction above.
pub fn gaussian_corr_tail_mc_direct<R: Rng>(n: u64, a: f64, samples: u64, rng: &mut R) -> Result<TailEstimate, OracleError> {
    if n < 2 || samples == 0 {
        return Err(OracleError::InvalidInput("need n >= 2 and samples > 0".into()));
    }
    let mut hits = 0u64;
    for _ in 0..samples {
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let x: f64 = StandardNormal.sample(rng);
            let y: f64 = StandardNormal.sample(rng);
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
        }
        if sxy / (sxx.sqrt() * syy.sqrt()) >= a {
            hits += 1;
        }
    }
    Ok(tail_estimate(hits, samples))
}

fn tail_estimate(hits: u64, samples: u64) -> TailEstimate {
    let p = hits as f64 / samples as f64;
    TailEstimate { p_hat: p, se: (p * (1.0 - p) / samples as f64).sqrt(), hits, samples }
}
