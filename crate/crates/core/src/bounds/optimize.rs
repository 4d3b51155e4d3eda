//! Numerical maximisation of `log M` subject to `eps <= target` and
//! `N <= target` over the four thresholds and `eps0`.
//!
//! For fixed `log M`, `eps0` is eliminated in closed form: with
//! `eps0 = (eps - eps')/(1 - eps')` the error target is met with equality and
//! `N = N' (1 - eps)/(1 - eps')`. The thresholds are searched in coordinates
//! that turn every constraint into a box:
//!
//! * `u = ln eps'`, `u <= ln eps`;
//! * `t`, the logit of the share `s` of `eps'` spent on `(M-1)e^{-(gamma1+a_A)}`;
//! * `v > 0`, the log-gap placing `(M-1)e^{-gamma1}` above both error terms;
//! * `a_R > 0`.
//!
//! The minimal `N` is found by cyclic coordinate descent with grid-seeded
//! golden-section line searches, and the largest feasible `log M` by
//! bisection.

use serde::Serialize;

use super::{eps_and_n_prime, log_m_minus_one, schedule_thm2_for_log_m, theorem1_bound, BoundConstants, BoundError, BoundReport, VlfParams};
use crate::numeric::minimize_1d;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizeOptions {
    /// Absolute tolerance on `log M` for the outer bisection.
    pub log_m_tol: f64,
    pub max_sweeps: usize,
    pub grid: usize,
    /// Below this `log M` the result is rounded down to an integer `M`.
    pub integer_m_below: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { log_m_tol: 1e-9, max_sweeps: 80, grid: 24, integer_m_below: 30.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizedCode {
    pub params: VlfParams,
    pub report: BoundReport,
}

const U_SPAN: f64 = 60.0;
const T_RANGE: (f64, f64) = (-30.0, 30.0);
const V_RANGE: (f64, f64) = (1e-9, 60.0);
const AR_RANGE: (f64, f64) = (1e-6, 80.0);

#[derive(Debug, Clone, Copy)]
struct Coords([f64; 4]);

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

fn to_params(c: &Coords, log_m: f64, eps: f64) -> Option<VlfParams> {
    let [u, t, v, a_r] = c.0;
    let lm1 = log_m_minus_one(log_m);
    let s = sigmoid(t);
    let share = s.max(1.0 - s);
    let ln_q = u + share.ln() + v;
    let gamma1 = lm1 - ln_q;
    let gamma2 = lm1 - (u + (1.0 - s).ln());
    let a_accept = share.ln() + v - s.ln();
    let eps_prime = u.exp();
    let eps0 = ((eps - eps_prime) / (1.0 - eps_prime)).max(0.0);
    let p = VlfParams { log_m, gamma1, gamma2, a_accept, a_reject: a_r, eps0 };
    p.validate().ok()?;
    Some(p)
}

fn objective(c: &Coords, log_m: f64, eps: f64, k: &BoundConstants) -> f64 {
    match to_params(c, log_m, eps) {
        Some(p) => {
            let (eps_prime, n_prime) = eps_and_n_prime(&p, k);
            if eps_prime > eps * (1.0 + 1e-12) {
                return f64::INFINITY;
            }
            n_prime * (1.0 - eps) / (1.0 - eps_prime)
        }
        None => f64::INFINITY,
    }
}

fn from_params(p: &VlfParams, k: &BoundConstants) -> Option<Coords> {
    let (eps_prime, _) = eps_and_n_prime(p, k);
    let lm1 = p.log_m_minus_one();
    let share_a = (lm1 - p.gamma1 - p.a_accept).exp() / eps_prime;
    if !(share_a > 0.0 && share_a < 1.0) {
        return None;
    }
    let ln_q = lm1 - p.gamma1;
    let u = eps_prime.ln();
    let v = ln_q - u - share_a.max(1.0 - share_a).ln();
    let t = (share_a / (1.0 - share_a)).ln();
    let c = [u, t, v, p.a_reject];
    c.iter().all(|x| x.is_finite()).then_some(Coords(c))
}

fn ranges(eps: f64) -> [(f64, f64); 4] {
    [(eps.ln() - U_SPAN, eps.ln()), T_RANGE, V_RANGE, AR_RANGE]
}

/// Minimal average length achievable at `log_m` and the coordinates
/// reaching it.
fn min_length(log_m: f64, eps: f64, k: &BoundConstants, start: Coords, opts: &OptimizeOptions) -> (f64, Coords) {
    let rng = ranges(eps);
    let mut c = start;
    for (i, r) in rng.iter().enumerate() {
        c.0[i] = c.0[i].clamp(r.0, r.1);
    }
    let mut best = objective(&c, log_m, eps, k);
    for _ in 0..opts.max_sweeps {
        let before = best;
        for i in 0..4 {
            let (lo, hi) = rng[i];
            let (x, val) = minimize_1d(
                |x| {
                    let mut trial = c;
                    trial.0[i] = x;
                    objective(&trial, log_m, eps, k)
                },
                lo,
                hi,
                opts.grid,
                1e-12,
            );
            if val < best {
                best = val;
                c.0[i] = x;
            }
        }
        if before.is_finite() && before - best <= 1e-14 * before {
            break;
        }
    }
    (best, c)
}

fn default_start(eps: f64) -> Coords {
    Coords([eps.ln() - 1.0, 0.0, 3.0, 3.0])
}

fn start_for(log_m: f64, eps: f64, k: &BoundConstants) -> Coords {
    schedule_thm2_for_log_m(log_m, eps, k)
        .ok()
        .and_then(|s| from_params(&s.params, k))
        .unwrap_or_else(|| default_start(eps))
}

/// Largest `log M` (nats) whose optimised bound meets `eps` and `N`.
pub fn optimize_params(k: &BoundConstants, eps: f64, n: f64) -> Result<OptimizedCode, BoundError> {
    optimize_params_with(k, eps, n, &OptimizeOptions::default())
}

pub fn optimize_params_with(
    k: &BoundConstants,
    eps: f64,
    n: f64,
    opts: &OptimizeOptions,
) -> Result<OptimizedCode, BoundError> {
    if !(eps > 0.0 && eps < 1.0) || !(n > 0.0 && n.is_finite()) {
        return Err(BoundError::InvalidParams(format!("eps = {eps}, N = {n}")));
    }
    for v in [k.capacity, k.d_accept, k.d_reject] {
        if !(v > 0.0) {
            return Err(BoundError::NonPositiveDrift(v));
        }
    }
    let solve = |log_m: f64, warm: Option<Coords>| {
        let mut best = min_length(log_m, eps, k, start_for(log_m, eps, k), opts);
        if let Some(w) = warm {
            let alt = min_length(log_m, eps, k, w, opts);
            if alt.0 < best.0 {
                best = alt;
            }
        }
        best
    };

    let mut lo = std::f64::consts::LN_2;
    let (n_lo, mut c_lo) = solve(lo, None);
    if !(n_lo <= n) {
        return Err(BoundError::Infeasible { eps, n });
    }
    let mut hi = super::converse_bound(k.capacity, eps, n).max(lo * 2.0);
    while solve(hi, Some(c_lo)).0 <= n {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > opts.log_m_tol * lo.max(1.0) {
        let mid = 0.5 * (lo + hi);
        let (len, c) = solve(mid, Some(c_lo));
        if len <= n {
            lo = mid;
            c_lo = c;
        } else {
            hi = mid;
        }
    }
    let mut log_m = lo;
    if log_m < opts.integer_m_below {
        log_m = log_m.exp().floor().max(2.0).ln();
        c_lo = solve(log_m, Some(c_lo)).1;
    }
    let params = to_params(&c_lo, log_m, eps).ok_or(BoundError::Infeasible { eps, n })?;
    let report = theorem1_bound(&params, k)?;
    Ok(OptimizedCode { params, report })
}
