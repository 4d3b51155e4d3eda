use serde::Serialize;

use super::TrialOutcome;
use crate::numeric::{wilson_interval, Z_95};

/// Sample mean with a 95% normal-approximation interval. The interval is
/// `NaN` when fewer than two samples are available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCi {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

impl MeanCi {
    fn from_moments(m: &Moments) -> Self {
        if m.n < 2 {
            return Self { mean: m.mean, lo: f64::NAN, hi: f64::NAN };
        }
        let half = Z_95 * (m.variance() / m.n as f64).sqrt();
        Self { mean: m.mean, lo: m.mean - half, hi: m.mean + half }
    }
}

/// Welford running mean and variance.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn variance(&self) -> f64 {
        if self.n < 2 {
            f64::NAN
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

/// Running co-moment of two series.
#[derive(Debug, Clone, Copy, Default)]
struct CoMoments {
    x: Moments,
    y: Moments,
    cxy: f64,
}

impl CoMoments {
    fn push(&mut self, x: f64, y: f64) {
        let dx = x - self.x.mean;
        self.x.push(x);
        self.y.push(y);
        self.cxy += dx * (y - self.y.mean);
    }

    /// `E[x]/E[y]` with a delta-method interval.
    fn ratio(&self) -> MeanCi {
        let n = self.x.n;
        let r = self.x.mean / self.y.mean;
        if n < 2 || self.y.mean == 0.0 {
            return MeanCi { mean: r, lo: f64::NAN, hi: f64::NAN };
        }
        let cov = self.cxy / (n - 1) as f64;
        let var = (self.x.variance() - 2.0 * r * cov + r * r * self.y.variance()).max(0.0);
        let half = Z_95 * (var / n as f64).sqrt() / self.y.mean.abs();
        MeanCi { mean: r, lo: r - half, hi: r + half }
    }
}

/// Aggregate of a Monte-Carlo run. Censored trials count as errors and
/// contribute the horizon to `n_hat`; `censor_rate` reports how many there
/// were.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub trials: u64,
    pub errors: u64,
    pub eps_hat: f64,
    /// 95% Wilson interval.
    pub eps_ci: (f64, f64),
    pub n_hat: MeanCi,
    /// Average power `sum energy / sum tau` (Gaussian variants).
    pub power_hat: Option<MeanCi>,
    /// Mean of `energy - P tau` per trial (Gaussian variants).
    pub energy_excess: Option<MeanCi>,
    pub censored: u64,
    pub censor_rate: f64,
    pub stopped_at_zero: u64,
    pub entered_c2: u64,
    /// Fewer than two trials: the mean intervals are undefined.
    pub degenerate_ci: bool,
}

pub(crate) struct Aggregator {
    power: Option<f64>,
    trials: u64,
    errors: u64,
    censored: u64,
    zero: u64,
    c2: u64,
    tau: Moments,
    energy_tau: CoMoments,
    excess: Moments,
}

impl Aggregator {
    pub(crate) fn new(power: Option<f64>) -> Self {
        Self {
            power,
            trials: 0,
            errors: 0,
            censored: 0,
            zero: 0,
            c2: 0,
            tau: Moments::default(),
            energy_tau: CoMoments::default(),
            excess: Moments::default(),
        }
    }

    pub(crate) fn push(&mut self, o: &TrialOutcome) {
        self.trials += 1;
        self.errors += u64::from(!o.correct);
        self.censored += u64::from(o.censored);
        self.zero += u64::from(o.stopped_at_zero);
        self.c2 += u64::from(o.entered_c2);
        self.tau.push(o.tau as f64);
        if let Some(p) = self.power {
            self.energy_tau.push(o.energy, o.tau as f64);
            self.excess.push(o.energy - p * o.tau as f64);
        }
    }

    pub(crate) fn finish(self) -> McEstimate {
        let n = self.trials;
        McEstimate {
            trials: n,
            errors: self.errors,
            eps_hat: self.errors as f64 / n as f64,
            eps_ci: wilson_interval(self.errors, n),
            n_hat: MeanCi::from_moments(&self.tau),
            power_hat: self.power.map(|_| self.energy_tau.ratio()),
            energy_excess: self.power.map(|_| MeanCi::from_moments(&self.excess)),
            censored: self.censored,
            censor_rate: self.censored as f64 / n as f64,
            stopped_at_zero: self.zero,
            entered_c2: self.c2,
            degenerate_ci: n < 2,
        }
    }
}

/// First-passage time estimate. Walks that never cross within the horizon
/// are counted at the horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassageEstimate {
    pub mean: MeanCi,
    pub censored: u64,
    pub trials: u64,
}

impl PassageEstimate {
    pub(crate) fn from_times(times: &[Option<u64>], n_max: u64) -> Self {
        let mut m = Moments::default();
        let mut censored = 0;
        for t in times {
            censored += u64::from(t.is_none());
            m.push(t.unwrap_or(n_max) as f64);
        }
        Self { mean: MeanCi::from_moments(&m), censored, trials: times.len() as u64 }
    }
}
