//! Closed-form parameter schedules for the known-channel and universal
//! schemes.

use serde::Serialize;

use super::{BoundConstants, BoundError, VlfParams};
use crate::types::tail_exponents;

/// Default slack in the `ln ln n1` terms of the universal schedule.
pub const DEFAULT_DELTA: f64 = 0.1;
/// Default multiplier in `n2 = c2 * gamma2 / C`.
pub const DEFAULT_C2: f64 = 2.0;

/// Known-channel schedule together with the horizon it was built for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KnownSchedule {
    pub params: VlfParams,
    pub n1: f64,
}

/// Known-channel schedule for horizon `n1`:
/// `gamma1 = log M + ln ln n1`, `gamma2 = log M + ln n1`, `a_A = a_R = ln n1`,
/// with `log M = n1 C - b - ln ln n1` and `eps0` chosen so the error bound is
/// at most `eps`.
pub fn schedule_thm2(n1: f64, eps: f64, k: &BoundConstants) -> Result<VlfParams, BoundError> {
    if !(n1 >= std::f64::consts::E) {
        return Err(BoundError::HorizonTooSmall(format!("N1 = {n1} is below e")));
    }
    let ln_n1 = n1.ln();
    let lnln = ln_n1.ln().max(0.0);
    let log_m = n1 * k.capacity - k.b - lnln;
    if !(log_m > 0.0) {
        return Err(BoundError::HorizonTooSmall(format!("N1 = {n1} leaves log M = {log_m}")));
    }
    let floor = (1.0 + 1.0 / ln_n1) / n1;
    if floor >= 1.0 || eps < floor {
        return Err(BoundError::HorizonTooSmall(format!(
            "N1 = {n1} needs eps >= {floor:.4e}, got {eps:.4e}"
        )));
    }
    if !(eps < 1.0) {
        return Err(BoundError::InvalidParams(format!("eps = {eps} must be below 1")));
    }
    let eps0 = (eps - floor) / (1.0 - floor);
    VlfParams::new(log_m, log_m + lnln, log_m + ln_n1, ln_n1, ln_n1, eps0)
}

/// Inverts the known-channel schedule: finds the horizon `n1` whose message
/// set size is `log_m`, i.e. the fixed point of `n1 = (log M + ln ln n1 + b)/C`.
pub fn schedule_thm2_for_log_m(log_m: f64, eps: f64, k: &BoundConstants) -> Result<KnownSchedule, BoundError> {
    if !(log_m > 0.0) || !(k.capacity > 0.0) {
        return Err(BoundError::InvalidParams(format!("log M = {log_m}, C = {}", k.capacity)));
    }
    let mut n1 = ((log_m + k.b) / k.capacity).max(std::f64::consts::E);
    for _ in 0..500 {
        let next = (log_m + n1.ln().ln().max(0.0) + k.b) / k.capacity;
        let done = (next - n1).abs() <= 1e-13 * n1;
        n1 = next;
        if done {
            break;
        }
    }
    let params = schedule_thm2(n1, eps, k)?;
    Ok(KnownSchedule { params: VlfParams { log_m, ..params }, n1 })
}

/// Metric family of the universal scheme; fixes the polynomial exponent `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UniversalFamily {
    /// Empirical mutual information over `|X| x |Y|` alphabets.
    Dmc { ax: usize, ay: usize },
    /// BSC flip-count metric.
    Bsc,
    /// Gaussian correlation metric.
    Gaussian,
}

impl UniversalFamily {
    pub fn exponent(&self) -> Result<f64, BoundError> {
        match *self {
            Self::Dmc { ax, ay } => tail_exponents(ax, ay)
                .map(|t| t.d)
                .map_err(|e| BoundError::InvalidParams(e.to_string())),
            Self::Bsc | Self::Gaussian => Ok(0.5),
        }
    }
}

/// `n1 = floor(log M / min(|X|, |Y|))`.
pub fn universal_n1(log_m: f64, ax: usize, ay: usize) -> f64 {
    (log_m / ax.min(ay) as f64).floor()
}

/// `n1 = floor(log M)` for the Gaussian universal scheme.
pub fn gaussian_n1(log_m: f64) -> f64 {
    log_m.floor()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniversalSchedule {
    pub params: VlfParams,
    pub n1: f64,
    pub d: f64,
    pub delta: f64,
}

impl UniversalSchedule {
    /// Length of the second analysis window, `c2 * gamma2 / C`.
    pub fn n2(&self, c2: f64, capacity: f64) -> f64 {
        c2 * self.params.gamma2 / capacity
    }
}

/// Universal schedule, independent of the channel:
/// `gamma1 = log M + d ln n1 + (1 + delta) ln ln n1`,
/// `gamma2 = log M + (d + 1) ln n1 + delta ln ln n1`, `a_A = a_R = ln n1`,
/// `eps0 = (eps - 1/n1) / (1 - 1/n1)`.
pub fn schedule_thm3(
    log_m: f64,
    n1: f64,
    family: UniversalFamily,
    eps: f64,
    delta: f64,
) -> Result<UniversalSchedule, BoundError> {
    if !(n1 >= 3.0) {
        return Err(BoundError::HorizonTooSmall(format!("n1 = {n1} must be at least 3")));
    }
    if !(delta >= 0.0) {
        return Err(BoundError::InvalidParams(format!("delta = {delta} must be non-negative")));
    }
    let floor = 1.0 / n1;
    if eps < floor {
        return Err(BoundError::EpsTooSmall { eps, floor });
    }
    if !(eps < 1.0) {
        return Err(BoundError::InvalidParams(format!("eps = {eps} must be below 1")));
    }
    let d = family.exponent()?;
    let ln_n1 = n1.ln();
    let lnln = ln_n1.ln();
    let params = VlfParams::new(
        log_m,
        log_m + d * ln_n1 + (1.0 + delta) * lnln,
        log_m + (d + 1.0) * ln_n1 + delta * lnln,
        ln_n1,
        ln_n1,
        (eps - floor) / (1.0 - floor),
    )?;
    Ok(UniversalSchedule { params, n1, d, delta })
}
