use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{EngineError, SchemeChannel};
use crate::channel::{control_pair_from_rows, ControlPair, InputDist};

/// Channel estimate built from the training sequence alone.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EmpiricalChannel {
    /// Row `x` is the empirical output law of the `ℓ_x` uses of input `x`.
    Dmc { rows: Vec<Vec<f64>>, samples: Vec<u64> },
    /// `ℓ⁻¹ Σ Y_i²` from an all-zero training input.
    Gaussian { noise_var: f64, samples: u64 },
}

impl EmpiricalChannel {
    /// Control pair of the estimated kernel.
    pub fn control_pair(&self) -> Option<ControlPair> {
        match self {
            Self::Dmc { rows, .. } => control_pair_from_rows(rows).ok(),
            Self::Gaussian { .. } => None,
        }
    }

    /// Mutual information of the estimated kernel under `px` (DMC), or the
    /// capacity at the estimated noise variance (Gaussian).
    pub fn capacity_estimate(&self, px: Option<&InputDist>, power: f64) -> f64 {
        match self {
            Self::Dmc { rows, .. } => {
                let ay = rows[0].len();
                let px = px.cloned().unwrap_or_else(|| InputDist::uniform(rows.len()));
                let py: Vec<f64> = (0..ay).map(|y| rows.iter().zip(px.probs()).map(|(r, p)| p * r[y]).sum()).collect();
                let mut i = 0.0;
                for (r, p) in rows.iter().zip(px.probs()) {
                    for (y, &w) in r.iter().enumerate() {
                        if w > 0.0 {
                            i += p * w * (w / py[y]).ln();
                        }
                    }
                }
                i.max(0.0)
            }
            Self::Gaussian { noise_var, .. } => 0.5 * (power / noise_var).ln_1p(),
        }
    }
}

/// Sends the cyclic training input `0, 1, ..., |X|-1, 0, ...` (DMC) or `ℓ`
/// zeros (Gaussian) through the true channel.
pub(crate) fn train<R: Rng>(channel: &SchemeChannel, len: u64, rng: &mut R) -> Result<EmpiricalChannel, EngineError> {
    match channel {
        SchemeChannel::Dmc { dmc, .. } => {
            let (ax, ay) = (dmc.input_size(), dmc.output_size());
            if len < ax as u64 {
                return Err(EngineError::InsufficientTraining { needed: ax as u64, got: len });
            }
            let mut counts = vec![vec![0u64; ay]; ax];
            let cdfs: Vec<Vec<f64>> = dmc
                .rows()
                .iter()
                .map(|r| {
                    let mut acc = 0.0;
                    r.iter()
                        .map(|&p| {
                            acc += p;
                            acc
                        })
                        .collect()
                })
                .collect();
            for i in 0..len {
                let x = (i % ax as u64) as usize;
                let u: f64 = rng.random();
                let y = cdfs[x].iter().position(|&c| u < c).unwrap_or(ay - 1);
                counts[x][y] += 1;
            }
            let samples: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
            let rows = counts
                .iter()
                .zip(&samples)
                .map(|(r, &n)| r.iter().map(|&c| c as f64 / n as f64).collect())
                .collect();
            Ok(EmpiricalChannel::Dmc { rows, samples })
        }
        SchemeChannel::Gaussian(chan) => {
            if len < 1 {
                return Err(EngineError::InsufficientTraining { needed: 1, got: len });
            }
            let sd = chan.noise_var.sqrt();
            let mut ss = 0.0;
            for _ in 0..len {
                let z = sd * rng.sample::<f64, _>(StandardNormal);
                ss += z * z;
            }
            Ok(EmpiricalChannel::Gaussian { noise_var: ss / len as f64, samples: len })
        }
    }
}
