//! Flat key-value config file and the small value grammars shared by the verbs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

/// Every key a config file may set. Command-line flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub channel: Option<String>,
    pub variant: Option<String>,
    pub eps: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<String>,
    #[serde(rename = "N")]
    pub n: Option<String>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub honest_time_zero: Option<bool>,
    pub delta: Option<f64>,
    pub c2: Option<f64>,
    pub n_max: Option<u64>,
    pub horizon_factor: Option<f64>,
    pub training: Option<u64>,
    pub route: Option<String>,
    pub schedule: Option<String>,
    pub input: Option<String>,
    pub explicit_limit: Option<u64>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    #[serde(rename = "aA")]
    pub a_accept: Option<f64>,
    #[serde(rename = "aR")]
    pub a_reject: Option<f64>,
    pub eps0: Option<f64>,
    pub schemes: Option<String>,
    pub resume: Option<bool>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("config {}", path.display()))
    }
}

/// `ln M` from `2^k`, `e^x` or a plain positive number.
pub fn parse_log_m(s: &str) -> Result<f64> {
    let s = s.trim();
    let log_m = if let Some(k) = s.strip_prefix("2^") {
        let k: f64 = k.parse().with_context(|| format!("M = {s:?}: exponent is not a number"))?;
        k * std::f64::consts::LN_2
    } else if let Some(x) = s.strip_prefix("e^") {
        x.parse().with_context(|| format!("M = {s:?}: exponent is not a number"))?
    } else {
        let m: f64 = s.parse().with_context(|| format!("M = {s:?} is not a number, 2^k or e^x"))?;
        if !(m >= 1.0) {
            bail!("M = {s:?} must be at least 1");
        }
        m.ln()
    };
    if !(log_m > 0.0) || !log_m.is_finite() {
        bail!("M = {s:?} must exceed 1");
    }
    Ok(log_m)
}

/// `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| -> Result<f64> { t.trim().parse().with_context(|| format!("grid {s:?}: {t:?} is not a number")) };
    match parts.len() {
        1 => s.split(',').map(num).collect(),
        3 => {
            let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if !(step > 0.0) || stop < start {
                bail!("grid {s:?} needs step > 0 and stop >= start");
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            Ok((0..count).map(|i| start + i as f64 * step).collect())
        }
        _ => bail!("grid {s:?} must be start:stop:step or a comma list"),
    }
}
