use serde::Serialize;

use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SprtDecision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SprtOutcome {
    pub decision: SprtDecision,
    pub steps: u64,
    pub terminal_llr: f64,
}

/// Wald's sequential test on a stream of per-symbol LLRs: stops at the first
/// step whose partial sum leaves `[-a_reject, a_accept]` and accepts iff the
/// sum exceeds `a_accept`.
pub fn sprt<I>(llrs: I, a_accept: f64, a_reject: f64, max_steps: u64) -> Result<SprtOutcome, EngineError>
where
    I: IntoIterator<Item = f64>,
{
    if !(a_accept > 0.0 && a_reject > 0.0) {
        return Err(EngineError::InvalidConfig(format!(
            "SPRT thresholds must be positive (a_A = {a_accept}, a_R = {a_reject})"
        )));
    }
    let mut sum = 0.0;
    let mut steps = 0;
    for llr in llrs {
        if steps == max_steps {
            return Err(EngineError::HorizonExceeded { steps });
        }
        steps += 1;
        sum += llr;
        if sum > a_accept {
            return Ok(SprtOutcome { decision: SprtDecision::Accept, steps, terminal_llr: sum });
        }
        if sum < -a_reject {
            return Ok(SprtOutcome { decision: SprtDecision::Reject, steps, terminal_llr: sum });
        }
    }
    Err(EngineError::StreamEnded { steps })
}
