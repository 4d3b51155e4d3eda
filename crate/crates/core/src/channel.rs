//! Discrete memoryless and Gaussian channel models, information measures
//! and capacity computation.
//!
//! All logarithms are natural; information is measured in nats.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::numeric::xlogx;

/// Tolerance on transition-matrix row sums and input-distribution sums.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Tolerance used by [`entropy`] and [`kl_divergence`] on their inputs.
pub const SIMPLEX_TOL: f64 = 1e-9;
/// Default duality-gap tolerance for [`capacity`].
pub const CAPACITY_TOL: f64 = 1e-10;
/// Iteration cap for the Blahut-Arimoto loop.
pub const CAPACITY_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("p({index}) > 0 but q({index}) = 0")]
    AbsoluteContinuityViolation { index: usize },
    #[error("not a probability distribution (sum = {sum}, min = {min})")]
    NotADistribution { sum: f64, min: f64 },
    #[error("transition matrix is empty")]
    EmptyMatrix,
    #[error("row {row}: expected {expected} columns, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {col}: {reason}")]
    InvalidEntry { row: usize, col: usize, reason: String },
    #[error("row {row} sums to {sum}, expected 1")]
    RowSum { row: usize, sum: f64 },
    #[error("Blahut-Arimoto did not converge after {iterations} iterations (gap {gap:e})")]
    NonConvergence { iterations: usize, gap: f64 },
    #[error("symbol ({x}, {y}) out of range for a {ax}x{ay} channel")]
    SymbolOutOfRange { x: usize, y: usize, ax: usize, ay: usize },
    #[error("control pair needs at least two inputs")]
    SingleInput,
    #[error("invalid Gaussian channel: {0}")]
    InvalidGaussian(String),
    #[error("invalid channel spec '{spec}': {reason}")]
    InvalidSpec { spec: String, reason: String },
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

/// Probability vector over a finite input alphabet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDist {
    probs: Vec<f64>,
}

impl InputDist {
    pub fn new(probs: Vec<f64>) -> Result<Self, ChannelError> {
        check_simplex(&probs, ROW_SUM_TOL)?;
        Ok(Self { probs })
    }

    pub fn uniform(size: usize) -> Self {
        assert!(size > 0);
        Self { probs: vec![1.0 / size as f64; size] }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.probs.len() as f64;
        self.probs.iter().all(|p| (p - u).abs() <= ROW_SUM_TOL)
    }
}

/// Discrete memoryless channel with strictly positive transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dmc {
    ax: usize,
    ay: usize,
    w: Vec<f64>,
}

impl Dmc {
    /// Builds a channel from rows `P(. | x)`. Every entry must lie in (0, 1]
    /// and every row must sum to one within [`ROW_SUM_TOL`].
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, ChannelError> {
        let ax = rows.len();
        if ax == 0 || rows[0].is_empty() {
            return Err(ChannelError::EmptyMatrix);
        }
        let ay = rows[0].len();
        let mut w = Vec::with_capacity(ax * ay);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != ay {
                return Err(ChannelError::RaggedRow { row: r, expected: ay, found: row.len() });
            }
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() || v <= 0.0 || v > 1.0 {
                    return Err(ChannelError::InvalidEntry {
                        row: r,
                        col: c,
                        reason: format!("entry {v} is not in (0, 1]"),
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(ChannelError::RowSum { row: r, sum });
            }
            w.extend_from_slice(row);
        }
        Ok(Self { ax, ay, w })
    }

    pub fn bsc(p: f64) -> Result<Self, ChannelError> {
        Self::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    /// Channel obtained by feeding the output of `first` into `second`.
    /// Either factor may contain zeros; the product must not.
    pub fn cascade(first: &[Vec<f64>], second: &[Vec<f64>]) -> Result<Self, ChannelError> {
        if first.is_empty() || second.is_empty() {
            return Err(ChannelError::EmptyMatrix);
        }
        let mid = second.len();
        let out = second[0].len();
        let rows = first
            .iter()
            .map(|row| {
                if row.len() != mid {
                    return Err(ChannelError::DimensionMismatch { left: row.len(), right: mid });
                }
                Ok((0..out).map(|y| row.iter().zip(second).map(|(p, s)| p * s[y]).sum()).collect())
            })
            .collect::<Result<Vec<Vec<f64>>, _>>()?;
        Self::new(rows)
    }

    /// Parses a whitespace-separated matrix, one row per line. Blank lines and
    /// lines starting with `#` are skipped. Errors name the 1-based row and
    /// column of the offending entry.
    pub fn parse_matrix(text: &str) -> Result<Self, ChannelError> {
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let r = rows.len();
            let row = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .enumerate()
                .map(|(c, tok)| {
                    tok.parse::<f64>().map_err(|_| ChannelError::InvalidEntry {
                        row: r + 1,
                        col: c + 1,
                        reason: format!("'{tok}' is not a number"),
                    })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            rows.push(row);
        }
        Self::new(rows).map_err(|e| match e {
            ChannelError::InvalidEntry { row, col, reason } => ChannelError::InvalidEntry { row: row + 1, col: col + 1, reason },
            ChannelError::RowSum { row, sum } => ChannelError::RowSum { row: row + 1, sum },
            ChannelError::RaggedRow { row, expected, found } => ChannelError::RaggedRow { row: row + 1, expected, found },
            other => other,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ChannelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ChannelError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        Self::parse_matrix(&text)
    }

    pub fn input_size(&self) -> usize {
        self.ax
    }

    pub fn output_size(&self) -> usize {
        self.ay
    }

    #[inline]
    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.w[x * self.ay + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.w[x * self.ay..(x + 1) * self.ay]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.ax).map(|x| self.row(x).to_vec()).collect()
    }

    /// Output distribution induced by `px`.
    pub fn output_dist(&self, px: &InputDist) -> Result<Vec<f64>, ChannelError> {
        self.check_input(px)?;
        Ok((0..self.ay)
            .map(|y| (0..self.ax).map(|x| px.probs[x] * self.prob(x, y)).sum())
            .collect())
    }

    /// `I(P_X, P_{Y|X})`.
    pub fn mutual_information(&self, px: &InputDist) -> Result<f64, ChannelError> {
        let py = self.output_dist(px)?;
        Ok(self.mi_with_output(px.probs(), &py))
    }

    fn mi_with_output(&self, px: &[f64], py: &[f64]) -> f64 {
        let mut total = 0.0;
        for (x, &p) in px.iter().enumerate() {
            if p > 0.0 {
                total += p * self.row_divergence(x, py);
            }
        }
        total.max(0.0)
    }

    fn row_divergence(&self, x: usize, q: &[f64]) -> f64 {
        self.row(x).iter().zip(q).map(|(&w, &qy)| w * (w / qy).ln()).sum()
    }

    fn check_input(&self, px: &InputDist) -> Result<(), ChannelError> {
        if px.len() != self.ax {
            return Err(ChannelError::DimensionMismatch { left: px.len(), right: self.ax });
        }
        Ok(())
    }
}

/// Additive white Gaussian noise channel `Y = X + Z`, `Z ~ N(0, noise_var)`,
/// with average input power `power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianChannel {
    pub noise_var: f64,
    pub power: f64,
}

impl GaussianChannel {
    pub fn new(noise_var: f64, power: f64) -> Result<Self, ChannelError> {
        if !(noise_var.is_finite() && noise_var > 0.0) {
            return Err(ChannelError::InvalidGaussian(format!("noise variance {noise_var} must be positive")));
        }
        if !(power.is_finite() && power > 0.0) {
            return Err(ChannelError::InvalidGaussian(format!("power {power} must be positive")));
        }
        Ok(Self { noise_var, power })
    }

    /// Unit noise variance and power equal to `snr`.
    pub fn from_snr(snr: f64) -> Result<Self, ChannelError> {
        Self::new(1.0, snr)
    }

    pub fn snr(&self) -> f64 {
        self.power / self.noise_var
    }

    /// `C(S) = ln(1 + S) / 2`.
    pub fn capacity(&self) -> f64 {
        0.5 * self.snr().ln_1p()
    }

    /// Divergence between the two antipodal control distributions, `2S`.
    pub fn c1(&self) -> f64 {
        2.0 * self.snr()
    }

    /// Variance of the information density under i.i.d. Gaussian inputs.
    pub fn dispersion(&self) -> f64 {
        let s = self.snr();
        s / (1.0 + s)
    }
}

/// Input pair used during the hypothesis-testing phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlPair {
    pub x_accept: usize,
    pub x_reject: usize,
    /// `D(P_{Y|X=x_accept} || P_{Y|X=x_reject})`.
    pub c1_value: f64,
}

fn check_simplex(p: &[f64], tol: f64) -> Result<(), ChannelError> {
    let sum: f64 = p.iter().sum();
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    if p.is_empty() || !sum.is_finite() || !(min >= 0.0) || (sum - 1.0).abs() > tol {
        return Err(ChannelError::NotADistribution { sum, min });
    }
    Ok(())
}

/// `D(p || q)` in nats.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, ChannelError> {
    if p.len() != q.len() {
        return Err(ChannelError::DimensionMismatch { left: p.len(), right: q.len() });
    }
    check_simplex(p, SIMPLEX_TOL)?;
    check_simplex(q, SIMPLEX_TOL)?;
    let mut d = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > 0.0 {
            if qi == 0.0 {
                return Err(ChannelError::AbsoluteContinuityViolation { index: i });
            }
            d += pi * (pi / qi).ln();
        }
    }
    Ok(d.max(0.0))
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> Result<f64, ChannelError> {
    check_simplex(p, SIMPLEX_TOL)?;
    Ok(-p.iter().map(|&x| xlogx(x)).sum::<f64>())
}

/// Binary entropy `h_b(p)` in nats, with `h_b(0) = h_b(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    -xlogx(p) - xlogx(1.0 - p)
}

/// Capacity and a capacity-achieving input distribution, via Blahut-Arimoto.
///
/// Iterates until the gap between `max_x D(P_{Y|X=x} || P_Y)` and `I(P_X)`
/// is at most `tol`. The returned value is the achieved `I(P_X)`.
pub fn capacity(dmc: &Dmc, tol: f64) -> Result<(f64, InputDist), ChannelError> {
    capacity_with_limit(dmc, tol, CAPACITY_MAX_ITER)
}

pub fn capacity_with_limit(dmc: &Dmc, tol: f64, max_iter: usize) -> Result<(f64, InputDist), ChannelError> {
    let ax = dmc.ax;
    let mut px = vec![1.0 / ax as f64; ax];
    let mut py = vec![0.0; dmc.ay];
    let mut div = vec![0.0; ax];
    let mut gap = f64::INFINITY;
    for _ in 0..max_iter {
        for (y, slot) in py.iter_mut().enumerate() {
            *slot = (0..ax).map(|x| px[x] * dmc.prob(x, y)).sum();
        }
        for (x, d) in div.iter_mut().enumerate() {
            *d = dmc.row_divergence(x, &py);
        }
        let lower: f64 = px.iter().zip(&div).map(|(p, d)| p * d).sum();
        let upper = div.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        gap = upper - lower;
        if gap <= tol {
            let total: f64 = px.iter().sum();
            px.iter_mut().for_each(|p| *p /= total);
            return Ok((lower.max(0.0), InputDist { probs: px }));
        }
        // Multiplicative update; shift by the max exponent to avoid overflow.
        let mut total = 0.0;
        for (p, d) in px.iter_mut().zip(&div) {
            *p *= (d - upper).exp();
            total += *p;
        }
        px.iter_mut().for_each(|p| *p /= total);
    }
    Err(ChannelError::NonConvergence { iterations: max_iter, gap })
}

/// Input pair maximising `D(P_{Y|X=x} || P_{Y|X=x'})` over ordered pairs
/// with `x != x'`. Ties resolve to the lexicographically smallest pair.
pub fn control_pair(dmc: &Dmc) -> Result<ControlPair, ChannelError> {
    control_pair_from_rows(&dmc.rows())
}

/// Same as [`control_pair`] for an arbitrary row-stochastic matrix, which may
/// contain zeros (e.g. an estimated channel). Pairs with infinite divergence
/// win over any finite one.
pub fn control_pair_from_rows(rows: &[Vec<f64>]) -> Result<ControlPair, ChannelError> {
    if rows.len() < 2 {
        return Err(ChannelError::SingleInput);
    }
    let mut best: Option<ControlPair> = None;
    for a in 0..rows.len() {
        for r in 0..rows.len() {
            if a == r {
                continue;
            }
            let d = rows_divergence(&rows[a], &rows[r]);
            if best.is_none_or(|b| d > b.c1_value) {
                best = Some(ControlPair { x_accept: a, x_reject: r, c1_value: d });
            }
        }
    }
    Ok(best.expect("at least one ordered pair"))
}

fn rows_divergence(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi == 0.0 {
                return f64::INFINITY;
            }
            d += pi * (pi / qi).ln();
        }
    }
    d.max(0.0)
}

/// `ı(x; y) = ln P_{Y|X}(y|x) / P_Y(y)` with `P_Y` induced by `px`.
pub fn information_density(px: &InputDist, dmc: &Dmc, x: usize, y: usize) -> Result<f64, ChannelError> {
    if x >= dmc.ax || y >= dmc.ay {
        return Err(ChannelError::SymbolOutOfRange { x, y, ax: dmc.ax, ay: dmc.ay });
    }
    let py = dmc.output_dist(px)?;
    Ok((dmc.prob(x, y) / py[y]).ln())
}

/// Table of `ı(x; y)`, indexed `[x][y]`.
pub fn information_density_table(px: &InputDist, dmc: &Dmc) -> Result<Vec<Vec<f64>>, ChannelError> {
    let py = dmc.output_dist(px)?;
    Ok((0..dmc.ax)
        .map(|x| (0..dmc.ay).map(|y| (dmc.prob(x, y) / py[y]).ln()).collect())
        .collect())
}

/// Information density of one Gaussian channel use with `X ~ N(0, P)`:
/// `C - (y - x)^2 / (2 sigma^2) + y^2 / (2 (P + sigma^2))`.
pub fn gaussian_information_density(chan: &GaussianChannel, x: f64, y: f64) -> f64 {
    let s2 = chan.noise_var;
    chan.capacity() - (y - x) * (y - x) / (2.0 * s2) + y * y / (2.0 * (chan.power + s2))
}

/// Channel described by a command-line style spec string:
/// `bsc:<p>`, `dmc:<path>` or `awgn:<snr>`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ChannelSpec {
    Dmc(Dmc),
    Awgn(GaussianChannel),
}

impl ChannelSpec {
    pub fn parse(spec: &str) -> Result<Self, ChannelError> {
        let bad = |reason: &str| ChannelError::InvalidSpec { spec: spec.to_string(), reason: reason.to_string() };
        let (kind, arg) = spec.split_once(':').ok_or_else(|| bad("expected <kind>:<argument>"))?;
        match kind {
            "bsc" => {
                let p: f64 = arg.parse().map_err(|_| bad("crossover probability is not a number"))?;
                if !(p > 0.0 && p < 1.0) {
                    return Err(bad("crossover probability must lie in (0, 1)"));
                }
                Ok(Self::Dmc(Dmc::bsc(p)?))
            }
            "dmc" => Ok(Self::Dmc(Dmc::from_file(Path::new(arg))?)),
            "awgn" => {
                let snr: f64 = arg.parse().map_err(|_| bad("SNR is not a number"))?;
                Ok(Self::Awgn(GaussianChannel::from_snr(snr)?))
            }
            _ => Err(bad("unknown channel kind (expected bsc, dmc or awgn)")),
        }
    }
}
