//! Non-asymptotic achievability bounds for variable-length feedback codes
//! with a hypothesis-testing confirmation phase, plus the VLSF baseline and
//! the converse used for comparison.

mod optimize;
mod overshoot;
mod schedule;

pub use optimize::{optimize_params, optimize_params_with, OptimizeOptions, OptimizedCode};
pub use overshoot::{b_constant, gaussian_b_constant, DiscreteLaw, GaussianRole};
pub use schedule::{
    gaussian_n1, schedule_thm2, schedule_thm2_for_log_m, schedule_thm3, universal_n1, KnownSchedule,
    UniversalFamily, UniversalSchedule, DEFAULT_C2, DEFAULT_DELTA,
};

use serde::Serialize;
use thiserror::Error;

use crate::channel::{binary_entropy, control_pair, ChannelError, Dmc, GaussianChannel, InputDist};
use crate::numeric::QuadratureError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("non-positive drift (mean {0})")]
    NonPositiveDrift(f64),
    #[error("empty or invalid distribution")]
    EmptyDistribution,
    #[error("no parameters meet the targets (eps = {eps}, N = {n})")]
    Infeasible { eps: f64, n: f64 },
    #[error("horizon too small: {0}")]
    HorizonTooSmall(String),
    #[error("target error {eps} is below the schedule floor {floor}")]
    EpsTooSmall { eps: f64, floor: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Code parameters. `log_m` is `ln M` in nats so that huge message sets are
/// representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VlfParams {
    pub log_m: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub a_accept: f64,
    pub a_reject: f64,
    pub eps0: f64,
}

impl VlfParams {
    pub fn new(log_m: f64, gamma1: f64, gamma2: f64, a_accept: f64, a_reject: f64, eps0: f64) -> Result<Self, BoundError> {
        let p = Self { log_m, gamma1, gamma2, a_accept, a_reject, eps0 };
        p.validate()?;
        Ok(p)
    }

    /// Checks `log M >= 0`, `0 < gamma1 < gamma2`, positive finite
    /// thresholds and `eps0` in `[0, 1]`.
    pub fn validate(&self) -> Result<(), BoundError> {
        let bad = |m: String| Err(BoundError::InvalidParams(m));
        if !(self.log_m.is_finite() && self.log_m >= 0.0) {
            return bad(format!("log M = {} must be finite and non-negative", self.log_m));
        }
        if !(self.gamma1.is_finite() && self.gamma1 > 0.0) {
            return bad(format!("gamma1 = {} must be positive", self.gamma1));
        }
        if !(self.gamma2.is_finite() && self.gamma2 > self.gamma1) {
            return bad(format!("gamma2 = {} must exceed gamma1 = {}", self.gamma2, self.gamma1));
        }
        for (name, a) in [("a_A", self.a_accept), ("a_R", self.a_reject)] {
            if !(a.is_finite() && a > 0.0) {
                return bad(format!("{name} = {a} must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.eps0) {
            return bad(format!("eps0 = {} must lie in [0, 1]", self.eps0));
        }
        Ok(())
    }

    /// `ln(M - 1)`, `-inf` when `M = 1`.
    pub fn log_m_minus_one(&self) -> f64 {
        log_m_minus_one(self.log_m)
    }

    pub fn m_log2(&self) -> f64 {
        self.log_m / std::f64::consts::LN_2
    }
}

pub(crate) fn log_m_minus_one(log_m: f64) -> f64 {
    if log_m <= 0.0 {
        f64::NEG_INFINITY
    } else {
        log_m + (-(-log_m).exp_m1()).ln()
    }
}

/// Channel-dependent constants entering the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    /// `I(P_X, P_{Y|X})`, the drift of the communication-phase metric.
    pub capacity: f64,
    pub b: f64,
    pub b_accept: f64,
    pub b_reject: f64,
    /// `D(P_A || P_R)`.
    pub d_accept: f64,
    /// `D(P_R || P_A)`.
    pub d_reject: f64,
}

impl BoundConstants {
    /// Constants for a DMC with input distribution `px` and the channel's own
    /// control pair.
    pub fn for_dmc(dmc: &Dmc, px: &InputDist) -> Result<Self, BoundError> {
        let capacity = dmc.mutual_information(px)?;
        let b = b_constant(&DiscreteLaw::information_density(dmc, px)?)?;
        let cp = control_pair(dmc)?;
        let (accept_law, reject_law) = DiscreteLaw::control_llrs(dmc, cp.x_accept, cp.x_reject);
        let d_reject = reject_law.mean();
        Ok(Self {
            capacity,
            b,
            b_accept: b_constant(&accept_law)?,
            b_reject: b_constant(&reject_law)?,
            d_accept: cp.c1_value,
            d_reject,
        })
    }

    /// Constants for the Gaussian channel with i.i.d. `N(0, P)` codewords and
    /// antipodal `+-sqrt(P)` control symbols.
    pub fn for_gaussian(chan: &GaussianChannel) -> Result<Self, BoundError> {
        let b = gaussian_b_constant(chan, GaussianRole::Communication)?;
        let b_ht = gaussian_b_constant(chan, GaussianRole::Accept)?;
        Ok(Self {
            capacity: chan.capacity(),
            b,
            b_accept: b_ht,
            b_reject: b_ht,
            d_accept: chan.c1(),
            d_reject: chan.c1(),
        })
    }
}

/// Evaluated bound: `eps' <= eps`-type quantities from the four thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub eps_prime: f64,
    pub n_prime: f64,
    pub eps: f64,
    pub n_avg: f64,
    pub log_m: f64,
    /// `log M / N` in nats per channel use.
    pub rate: f64,
}

impl BoundReport {
    pub fn rate_bits(&self) -> f64 {
        self.rate / std::f64::consts::LN_2
    }
}

/// Evaluates the achievability bound for the given parameters:
///
/// `eps' = (M-1)(e^{-(gamma1 + a_A)} + e^{-gamma2})`,
/// `N' = (gamma1 + b)/C + ((M-1)e^{-gamma1} + e^{-a_R})(gamma2 - gamma1 + b)/C
///       + (a_A + b_A)/D(P_A||P_R) + (M-1)e^{-gamma1}(a_R + b_R)/D(P_R||P_A)`,
///
/// then `N = (1 - eps0) N'` and `eps = eps0 + (1 - eps0) eps'`.
pub fn theorem1_bound(params: &VlfParams, k: &BoundConstants) -> Result<BoundReport, BoundError> {
    params.validate()?;
    if params.eps0 >= 1.0 {
        return Err(BoundError::InvalidParams("eps0 must be below 1 for the bound".into()));
    }
    check_constants(k)?;
    let (eps_prime, n_prime) = eps_and_n_prime(params, k);
    let n_avg = (1.0 - params.eps0) * n_prime;
    let eps = params.eps0 + (1.0 - params.eps0) * eps_prime;
    Ok(BoundReport { eps_prime, n_prime, eps, n_avg, log_m: params.log_m, rate: params.log_m / n_avg })
}

/// Convenience wrapper computing the constants from a DMC first.
pub fn theorem1_bound_dmc(params: &VlfParams, dmc: &Dmc, px: &InputDist) -> Result<BoundReport, BoundError> {
    theorem1_bound(params, &BoundConstants::for_dmc(dmc, px)?)
}

fn check_constants(k: &BoundConstants) -> Result<(), BoundError> {
    for v in [k.capacity, k.d_accept, k.d_reject] {
        if !(v > 0.0) {
            return Err(BoundError::NonPositiveDrift(v));
        }
    }
    Ok(())
}

pub(crate) fn eps_and_n_prime(p: &VlfParams, k: &BoundConstants) -> (f64, f64) {
    let lm1 = p.log_m_minus_one();
    let q1 = (lm1 - p.gamma1).exp();
    let eps_prime = (lm1 - p.gamma1 - p.a_accept).exp() + (lm1 - p.gamma2).exp();
    let n_prime = (p.gamma1 + k.b) / k.capacity
        + (q1 + (-p.a_reject).exp()) * (p.gamma2 - p.gamma1 + k.b) / k.capacity
        + (p.a_accept + k.b_accept) / k.d_accept
        + q1 * (p.a_reject + k.b_reject) / k.d_reject;
    (eps_prime, n_prime)
}

/// Converse: `log M <= (N C + h_b(eps)) / (1 - eps)`.
///
/// Panics unless `0 < eps < 1`.
pub fn converse_bound(capacity: f64, eps: f64, n: f64) -> f64 {
    assert!(eps > 0.0 && eps < 1.0, "eps must lie in (0, 1)");
    (n * capacity + binary_entropy(eps)) / (1.0 - eps)
}

/// Best point of the stop-feedback baseline `eps' = (M-1) e^{-gamma}`,
/// `N' = (gamma + b)/C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VlsfPoint {
    pub log_m: f64,
    pub gamma: f64,
    pub eps0: f64,
    pub rate: f64,
}

/// Maximises `log M` for the stop-feedback baseline at `(eps, N)`.
pub fn vlsf_baseline_bound(dmc: &Dmc, px: &InputDist, eps: f64, n: f64) -> Result<VlsfPoint, BoundError> {
    let c = dmc.mutual_information(px)?;
    if c <= 1e-15 {
        return Ok(VlsfPoint { log_m: 0.0, gamma: 0.0, eps0: eps, rate: 0.0 });
    }
    let b = b_constant(&DiscreteLaw::information_density(dmc, px)?)?;
    vlsf_from_constants(c, b, eps, n)
}

/// The maximiser has a closed form. With `kappa = (1 - eps)/(C N)` the
/// constraint `N >= (1 - eps0) N'` reads `(M-1)e^{-gamma} <= 1 - kappa(gamma + b)`,
/// so `ln(M-1) = gamma + ln min(eps, 1 - kappa(gamma + b))`, maximised where
/// `1 - kappa(gamma + b) = min(eps, kappa)`.
pub fn vlsf_from_constants(capacity: f64, b: f64, eps: f64, n: f64) -> Result<VlsfPoint, BoundError> {
    if !(eps > 0.0 && eps < 1.0) || !(n > 0.0) {
        return Err(BoundError::InvalidParams(format!("eps = {eps}, N = {n}")));
    }
    let kappa = (1.0 - eps) / (capacity * n);
    let g = eps.min(kappa);
    let gamma = (1.0 - g) / kappa - b;
    let lm1 = gamma + g.ln();
    if gamma <= 0.0 || lm1 < 0.0 {
        return Err(BoundError::Infeasible { eps, n });
    }
    let log_m = lm1 + (-lm1).exp().ln_1p();
    let eps_prime = g;
    let eps0 = (eps - eps_prime) / (1.0 - eps_prime);
    Ok(VlsfPoint { log_m, gamma, eps0, rate: log_m / n })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bsc_constants() -> BoundConstants {
        BoundConstants::for_dmc(&Dmc::bsc(0.11).unwrap(), &InputDist::uniform(2)).unwrap()
    }

    #[test]
    fn bsc_constants_values() {
        let k = bsc_constants();
        assert!((k.b - 0.57661).abs() < 1e-5);
        assert!((k.capacity - 0.34664).abs() < 1e-5);
        assert!((k.d_accept - 1.63078).abs() < 1e-5);
        assert_eq!(k.d_accept, k.d_reject);
        // Both LLR laws are +-ln(0.89/0.11); the sup is the smaller candidate.
        assert!((k.b_accept - (0.89f64 / 0.11).ln()).abs() < 1e-12);
    }

    #[test]
    fn invalid_gamma_order() {
        assert!(matches!(VlfParams::new(10.0, 5.0, 4.0, 1.0, 1.0, 0.0), Err(BoundError::InvalidParams(_))));
    }

    #[test]
    fn single_message_has_zero_eps_prime() {
        let p = VlfParams::new(0.0, 5.0, 10.0, 2.0, 2.0, 0.0).unwrap();
        let r = theorem1_bound(&p, &bsc_constants()).unwrap();
        assert_eq!(r.eps_prime, 0.0);
        assert_eq!(r.eps, 0.0);
    }

    #[test]
    fn eps0_scaling() {
        let k = bsc_constants();
        let mut p = VlfParams::new(20.0, 25.0, 30.0, 3.0, 3.0, 0.0).unwrap();
        let r0 = theorem1_bound(&p, &k).unwrap();
        p.eps0 = 0.25;
        let r1 = theorem1_bound(&p, &k).unwrap();
        assert!((r1.n_avg - 0.75 * r0.n_avg).abs() < 1e-9);
        assert!((r1.eps - (0.25 + 0.75 * r0.eps)).abs() < 1e-15);
        assert!((r0.rate - 20.0 / r0.n_avg).abs() < 1e-12);
    }

    #[test]
    fn bound_monotonicity() {
        let k = bsc_constants();
        let base = VlfParams::new(40.0, 45.0, 50.0, 4.0, 4.0, 0.01).unwrap();
        let r = theorem1_bound(&base, &k).unwrap();
        for h in [1e-3, 0.1, 1.0] {
            let mut p = base;
            p.gamma2 += h;
            let r2 = theorem1_bound(&p, &k).unwrap();
            assert!(r2.eps_prime < r.eps_prime && r2.n_prime > r.n_prime);
            let mut p = base;
            p.a_accept += h;
            let r2 = theorem1_bound(&p, &k).unwrap();
            assert!(r2.eps_prime < r.eps_prime && r2.n_prime > r.n_prime);
            let mut p = base;
            p.log_m += h;
            let r2 = theorem1_bound(&p, &k).unwrap();
            assert!(r2.eps_prime > r.eps_prime);
        }
    }

    #[test]
    fn converse_examples() {
        let c = 2f64.ln() - binary_entropy(0.11);
        let v = converse_bound(c, 1e-3, 1000.0);
        assert!((v - (1000.0 * c + binary_entropy(1e-3)) / 0.999).abs() < 1e-9);
    }

    #[test]
    fn vlsf_closed_form_matches_brute_force() {
        let k = bsc_constants();
        for &(eps, n) in &[(1e-3, 500.0), (1e-3, 4000.0), (0.1, 50.0), (1e-2, 200.0)] {
            let best = vlsf_from_constants(k.capacity, k.b, eps, n).unwrap();
            // Brute force over gamma, refined twice around the best grid point.
            let kappa = (1.0 - eps) / (k.capacity * n);
            let f = |gamma: f64| {
                let room = (1.0 - kappa * (gamma + k.b)).min(eps);
                if room > 0.0 { gamma + room.ln() } else { f64::NEG_INFINITY }
            };
            let (mut lo, mut hi) = (0.0, n * k.capacity / (1.0 - eps));
            let mut brute = f64::NEG_INFINITY;
            for _ in 0..3 {
                let step = (hi - lo) / 20_000.0;
                let mut arg = lo;
                for i in 0..=20_000 {
                    let g = lo + step * i as f64;
                    if f(g) > brute {
                        brute = f(g);
                        arg = g;
                    }
                }
                (lo, hi) = (arg - step, arg + step);
            }
            let lm1 = best.log_m + (-(-best.log_m).exp()).ln_1p();
            assert!(lm1 >= brute - 1e-9, "{lm1} {brute}");
            assert!(lm1 - brute < 1e-6, "{lm1} {brute}");
            assert!(best.log_m <= converse_bound(k.capacity, eps, n));
        }
        assert!(matches!(vlsf_from_constants(k.capacity, k.b, 1e-3, 2.0), Err(BoundError::Infeasible { .. })));
    }

    #[test]
    fn vlsf_zero_capacity() {
        let p = vlsf_baseline_bound(&Dmc::bsc(0.5).unwrap(), &InputDist::uniform(2), 1e-3, 1000.0).unwrap();
        assert_eq!(p.rate, 0.0);
    }
}
