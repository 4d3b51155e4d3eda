use serde::Serialize;

use super::BoundError;
use crate::channel::{information_density_table, Dmc, GaussianChannel, InputDist};
use crate::numeric::{gaussian_positive_second_moment, integrate, normal_pdf, QuadratureError};

const QUAD_TOL: f64 = 1e-11;
const CHECK_TOL: f64 = 1e-9;

/// Finitely supported law of a random-walk increment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteLaw {
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

impl DiscreteLaw {
    /// Zero-probability atoms are dropped.
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self, BoundError> {
        if values.len() != probs.len() || values.is_empty() {
            return Err(BoundError::EmptyDistribution);
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-9 || values.iter().any(|v| !v.is_finite()) {
            return Err(BoundError::EmptyDistribution);
        }
        let (values, probs) = values.into_iter().zip(probs).filter(|&(_, p)| p > 0.0).unzip();
        Ok(Self { values, probs })
    }

    /// Law of `ı(X; Y)` under `P_X x P_{Y|X}`.
    pub fn information_density(dmc: &Dmc, px: &InputDist) -> Result<Self, BoundError> {
        let table = information_density_table(px, dmc)?;
        let mut values = Vec::new();
        let mut probs = Vec::new();
        for (x, &p) in px.probs().iter().enumerate() {
            for (y, &v) in table[x].iter().enumerate() {
                values.push(v);
                probs.push(p * dmc.prob(x, y));
            }
        }
        Self::new(values, probs)
    }

    /// Laws of `ln P_A/P_R` under `P_A` and of `ln P_R/P_A` under `P_R`,
    /// where `P_A`, `P_R` are the output laws of inputs `xa`, `xr`.
    pub fn control_llrs(dmc: &Dmc, xa: usize, xr: usize) -> (Self, Self) {
        let ay = dmc.output_size();
        let llr: Vec<f64> = (0..ay).map(|y| (dmc.prob(xa, y) / dmc.prob(xr, y)).ln()).collect();
        let accept = Self { values: llr.clone(), probs: dmc.row(xa).to_vec() };
        let reject = Self { values: llr.iter().map(|v| -v).collect(), probs: dmc.row(xr).to_vec() };
        (accept, reject)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.probs).map(|(v, p)| v * p).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.values.iter().zip(&self.probs).map(|(v, p)| v * v * p).sum()
    }

    pub fn ess_sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Overshoot constant `b(X) = min{E[(X^+)^2] / E[X], ess sup X}`.
pub fn b_constant(law: &DiscreteLaw) -> Result<f64, BoundError> {
    if law.values.is_empty() {
        return Err(BoundError::EmptyDistribution);
    }
    let mean = law.mean();
    if !(mean > 0.0) {
        return Err(BoundError::NonPositiveDrift(mean));
    }
    let pos2: f64 = law.values.iter().zip(&law.probs).map(|(&v, &p)| p * v.max(0.0).powi(2)).sum();
    Ok((pos2 / mean).min(law.ess_sup()))
}

/// Which increment of the Gaussian scheme to characterise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GaussianRole {
    /// Information density of an i.i.d. `N(0, P)` codeword symbol.
    Communication,
    /// LLR `2 sqrt(P) y / sigma^2` when `+sqrt(P)` is sent.
    Accept,
    /// LLR of the reverse test when `-sqrt(P)` is sent (same law).
    Reject,
}

/// `b` for the Gaussian channel, by adaptive quadrature. Both roles have
/// unbounded support, so `b = E[(X^+)^2] / E[X]`.
pub fn gaussian_b_constant(chan: &GaussianChannel, role: GaussianRole) -> Result<f64, BoundError> {
    let c = chan.capacity();
    if !(c > 1e-14) {
        return Err(BoundError::NonPositiveDrift(c));
    }
    match role {
        GaussianRole::Communication => {
            // ı = C + kappa * W1 * W2 with W1, W2 i.i.d. standard normal.
            let kappa = chan.dispersion().sqrt();
            // The integrand is even in w.
            let m2 = 2.0
                * integrate(
                    |w: f64| normal_pdf(w) * gaussian_positive_second_moment(c, kappa * w),
                    0.0,
                    40.0,
                    QUAD_TOL,
                    0.0,
                )?;
            let check = 2.0 * integrate(|w: f64| normal_pdf(w) * (c * c + kappa * kappa * w * w), 0.0, 40.0, QUAD_TOL, 0.0)?;
            let exact = c * c + kappa * kappa;
            if (check - exact).abs() > CHECK_TOL * exact {
                return Err(QuadratureError::NotConverged { tol: CHECK_TOL, value: check, error: (check - exact).abs() }.into());
            }
            Ok(m2 / c)
        }
        GaussianRole::Accept | GaussianRole::Reject => {
            let s = chan.snr();
            let mean = 2.0 * s;
            let sd = 2.0 * s.sqrt();
            let m2 = integrate(
                |z: f64| z * z * normal_pdf((z - mean) / sd) / sd,
                (mean - 40.0 * sd).max(0.0),
                mean + 40.0 * sd,
                QUAD_TOL,
                0.0,
            )?;
            let closed = gaussian_positive_second_moment(mean, sd);
            if (m2 - closed).abs() > CHECK_TOL * closed {
                return Err(QuadratureError::NotConverged { tol: CHECK_TOL, value: m2, error: (m2 - closed).abs() }.into());
            }
            Ok(m2 / mean)
        }
    }
}
