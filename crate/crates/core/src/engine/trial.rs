//! One run of the three-phase protocol. The true message is index 0, so the
//! smallest-index rule resolves every tie in its favour.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::link::Link;
use super::sprt::{sprt, SprtDecision};
use super::{EngineError, TrialOutcome};

/// Upper limit on the mean number of proposals per window.
const MAX_PROPOSALS: f64 = 1e5;

#[derive(Debug, Clone, Copy)]
pub(crate) struct TrialSpec {
    pub gamma1: f64,
    pub gamma2: f64,
    pub a_accept: f64,
    pub a_reject: f64,
    pub eps0: f64,
    pub log_m: f64,
    pub log_m_minus_one: f64,
    pub n_max: u64,
    pub honest_time_zero: bool,
    /// `Some(M)` for an explicit codebook.
    pub explicit: Option<usize>,
}

pub(crate) fn run_trial<L: Link, R: Rng>(link: &L, spec: &TrialSpec, rng: &mut R) -> Result<TrialOutcome, EngineError> {
    if rng.random::<f64>() < spec.eps0 {
        let correct = spec.honest_time_zero && rng.random::<f64>() < (-spec.log_m).exp();
        return Ok(TrialOutcome { correct, stopped_at_zero: true, ..TrialOutcome::default() });
    }
    match spec.explicit {
        Some(m) => Ok(explicit_trial(link, spec, m, rng)),
        None => sampled_trial(link, spec, rng),
    }
}

fn censored(spec: &TrialSpec, len_c1: u64, len_ht: u64, len_c2: u64, energy: f64, entered_c2: bool) -> TrialOutcome {
    TrialOutcome {
        correct: false,
        tau: spec.n_max,
        len_c1,
        len_ht,
        len_c2,
        energy,
        censored: true,
        stopped_at_zero: false,
        entered_c2,
    }
}

struct HtResult {
    accepted: bool,
    steps: u64,
    energy: f64,
}

fn ht_phase<L: Link, R: Rng>(link: &L, spec: &TrialSpec, sent_accept: bool, rng: &mut R) -> Option<HtResult> {
    let x = link.control_symbol(sent_accept);
    let llrs = std::iter::repeat_with(|| link.ht_llr(link.channel(x, rng)));
    let out = sprt(llrs, spec.a_accept, spec.a_reject, spec.n_max).ok()?;
    Some(HtResult {
        accepted: out.decision == SprtDecision::Accept,
        steps: out.steps,
        energy: out.steps as f64 * link.energy(x),
    })
}

fn explicit_trial<L: Link, R: Rng>(link: &L, spec: &TrialSpec, m: usize, rng: &mut R) -> TrialOutcome {
    let mut states = vec![link.fresh(); m];
    let mut metrics = vec![0.0; m];
    let mut energy = 0.0;
    let mut n = 0;
    let step = |states: &mut [L::State], metrics: &mut [f64], energy: &mut f64, rng: &mut R| {
        let xt = link.draw_input(rng);
        let y = link.channel(xt, rng);
        *energy += link.energy(xt);
        for (i, (s, v)) in states.iter_mut().zip(metrics.iter_mut()).enumerate() {
            let x = if i == 0 { xt } else { link.draw_input(rng) };
            *v = link.advance(s, x, y);
        }
    };
    let first_above = |metrics: &[f64], g: f64| metrics.iter().position(|&v| v > g);

    let mut w1 = None;
    while w1.is_none() && n < spec.n_max {
        n += 1;
        step(&mut states, &mut metrics, &mut energy, rng);
        w1 = first_above(&metrics, spec.gamma1);
    }
    let Some(w1) = w1 else {
        return censored(spec, n, 0, 0, energy, false);
    };
    let tau1 = n;
    let Some(ht) = ht_phase(link, spec, w1 == 0, rng) else {
        return censored(spec, tau1, spec.n_max, 0, energy, false);
    };
    energy += ht.energy;
    if ht.accepted {
        return TrialOutcome {
            correct: w1 == 0,
            tau: tau1 + ht.steps,
            len_c1: tau1,
            len_ht: ht.steps,
            energy,
            ..TrialOutcome::default()
        };
    }
    let mut w2 = first_above(&metrics, spec.gamma2);
    while w2.is_none() && n < spec.n_max {
        n += 1;
        step(&mut states, &mut metrics, &mut energy, rng);
        w2 = first_above(&metrics, spec.gamma2);
    }
    let Some(w2) = w2 else {
        return censored(spec, tau1, ht.steps, n - tau1, energy, true);
    };
    TrialOutcome {
        correct: w2 == 0,
        tau: n + ht.steps,
        len_c1: tau1,
        len_ht: ht.steps,
        len_c2: n - tau1,
        energy,
        censored: false,
        stopped_at_zero: false,
        entered_c2: true,
    }
}

/// A wrong codeword whose metric crossed `gamma1`.
struct Crosser<S> {
    time: u64,
    state: S,
    metric: f64,
}

/// Wrong codewords whose first `gamma` crossing falls in `[lo, hi]`
/// (1-based positions), drawn by thinning a Poisson number of proposals.
fn sample_crossers<L: Link, R: Rng>(
    link: &L,
    ys: &[L::Out],
    lo: u64,
    hi: u64,
    gamma: f64,
    log_m_minus_one: f64,
    rng: &mut R,
) -> Result<Vec<Crosser<L::State>>, EngineError> {
    let mut out = Vec::new();
    if lo > hi || log_m_minus_one == f64::NEG_INFINITY {
        return Ok(out);
    }
    let log_b = link.log_regret(&ys[..hi as usize]);
    let mean = (log_m_minus_one + log_b - gamma).exp();
    if mean > MAX_PROPOSALS {
        return Err(EngineError::SamplerOverload { mean });
    }
    if !(mean > 0.0) {
        return Ok(out);
    }
    let count = Poisson::new(mean).map_err(|e| EngineError::InvalidConfig(e.to_string()))?.sample(rng) as u64;
    for _ in 0..count {
        let mut s = link.fresh();
        let mut log_ratio = 0.0;
        for n in 1..=hi {
            let y = ys[(n - 1) as usize];
            let (x, dl) = link.propose(&s, y, rng);
            log_ratio += dl;
            let metric = link.advance(&mut s, x, y);
            if metric > gamma {
                if n >= lo && rng.random::<f64>() < (log_ratio - log_b + gamma).exp() {
                    out.push(Crosser { time: n, state: s, metric });
                }
                break;
            }
        }
    }
    Ok(out)
}

fn sampled_trial<L: Link, R: Rng>(link: &L, spec: &TrialSpec, rng: &mut R) -> Result<TrialOutcome, EngineError> {
    let n_max = spec.n_max;
    let mut ys: Vec<L::Out> = Vec::new();
    // cumulative codeword energy
    let mut en: Vec<f64> = Vec::new();
    let mut truth = link.fresh();
    let mut true_metric = 0.0;
    let extend = |ys: &mut Vec<L::Out>, en: &mut Vec<f64>, truth: &mut L::State, rng: &mut R| {
        let x = link.draw_input(rng);
        let y = link.channel(x, rng);
        ys.push(y);
        en.push(en.last().copied().unwrap_or(0.0) + link.energy(x));
        link.advance(truth, x, y)
    };
    let energy_to = |en: &[f64], n: u64| if n == 0 { 0.0 } else { en[(n - 1) as usize] };

    let mut t1 = None;
    while t1.is_none() && (ys.len() as u64) < n_max {
        true_metric = extend(&mut ys, &mut en, &mut truth, rng);
        if true_metric > spec.gamma1 {
            t1 = Some(ys.len() as u64);
        }
    }
    let w1_hi = t1.map_or(n_max, |t| t - 1);
    let mut crossers = sample_crossers(link, &ys, 1, w1_hi, spec.gamma1, spec.log_m_minus_one, rng)?;
    let first_wrong = crossers.iter().map(|c| c.time).min();
    let (tau1, correct1) = match (t1, first_wrong) {
        (_, Some(w)) => (w, false),
        (Some(t), None) => (t, true),
        (None, None) => return Ok(censored(spec, n_max, 0, 0, energy_to(&en, n_max), false)),
    };
    let Some(ht) = ht_phase(link, spec, correct1, rng) else {
        return Ok(censored(spec, tau1, n_max, 0, energy_to(&en, tau1), false));
    };
    if ht.accepted {
        return Ok(TrialOutcome {
            correct: correct1,
            tau: tau1 + ht.steps,
            len_c1: tau1,
            len_ht: ht.steps,
            energy: energy_to(&en, tau1) + ht.energy,
            ..TrialOutcome::default()
        });
    }

    let mut t2 = None;
    if let Some(t) = t1 {
        if true_metric > spec.gamma2 {
            t2 = Some(t);
        }
        while t2.is_none() && (ys.len() as u64) < n_max {
            if extend(&mut ys, &mut en, &mut truth, rng) > spec.gamma2 {
                t2 = Some(ys.len() as u64);
            }
        }
        let hi = t2.map_or(n_max, |t| t - 1);
        crossers.extend(sample_crossers(link, &ys, t, hi, spec.gamma1, spec.log_m_minus_one, rng)?);
    }
    let limit = t2.map_or(n_max, |t| t - 1);
    let mut first2: Option<u64> = None;
    for c in crossers {
        if c.time > limit {
            continue;
        }
        if c.metric > spec.gamma2 {
            first2 = Some(first2.map_or(c.time, |f| f.min(c.time)));
            continue;
        }
        let mut s = c.state;
        for n in c.time + 1..=limit {
            let x = link.draw_input(rng);
            if link.advance(&mut s, x, ys[(n - 1) as usize]) > spec.gamma2 {
                first2 = Some(first2.map_or(n, |f| f.min(n)));
                break;
            }
        }
    }
    let (tau2, correct) = match (t2, first2) {
        (_, Some(w)) => (w, false),
        (Some(t), None) => (t, true),
        (None, None) => {
            return Ok(censored(spec, tau1, ht.steps, n_max - tau1, energy_to(&en, n_max) + ht.energy, true));
        }
    };
    Ok(TrialOutcome {
        correct,
        tau: tau2 + ht.steps,
        len_c1: tau1,
        len_ht: ht.steps,
        len_c2: tau2 - tau1,
        energy: energy_to(&en, tau2) + ht.energy,
        censored: false,
        stopped_at_zero: false,
        entered_c2: true,
    })
}
