use std::collections::HashSet;
use std::f64::consts::LN_2;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use vlf_core::bounds::{
    converse_bound, gaussian_n1, optimize_params, schedule_thm2_for_log_m, schedule_thm3, theorem1_bound,
    universal_n1, vlsf_from_constants, BoundConstants, BoundReport, UniversalFamily, VlfParams, DEFAULT_C2,
    DEFAULT_DELTA,
};
use vlf_core::channel::{capacity, ChannelSpec, InputDist, CAPACITY_TOL};
use vlf_core::engine::{CodebookRoute, SchemeChannel, SchemeConfig, Simulator, TrialOutcome, Variant};

use crate::config::{parse_grid, parse_log_m, FileConfig};
use crate::csv::{opt, prob, rate, read_rows, real, Sink};
use crate::{BoundArgs, Common, OptimizeArgs, SimulateArgs, SweepArgs, Thresholds};

pub const DEFAULT_M: &str = "2^60";
pub const DEFAULT_EPS: f64 = 0.05;
pub const DEFAULT_TRIALS: u64 = 10_000;
pub const DEFAULT_TRAINING: u64 = 100_000;

pub const BOUND_HEADER: [&str; 15] = [
    "scheme", "N", "eps", "logM_nats", "M_log2", "rate_bits_per_use", "gamma1", "gamma2", "aA", "aR", "eps0",
    "eps_prime", "N_prime", "n1", "n2",
];

pub const SWEEP_HEADER: [&str; 11] =
    ["N", "eps", "logM_nats", "rate_bits_per_use", "gamma1", "gamma2", "aA", "aR", "eps0", "M_log2", "scheme"];

pub const SIMULATE_HEADER: [&str; 29] = [
    "variant", "channel", "seed", "trials", "schedule", "logM_nats", "M_log2", "gamma1", "gamma2", "aA", "aR", "eps0",
    "training", "n_max", "route", "eps_hat", "eps_lo", "eps_hi", "n_hat", "n_lo", "n_hi", "power_hat", "power_lo",
    "power_hi", "censor_rate", "stopped_at_zero", "entered_c2", "eps_bound", "N_bound",
];

pub fn need<T>(key: &str, v: Option<T>) -> Result<T> {
    v.ok_or_else(|| anyhow!("missing `{key}`: pass --{key} or set it in the config file"))
}

pub struct Resolved {
    pub spec_text: String,
    pub spec: ChannelSpec,
    pub eps: f64,
    pub output: Option<PathBuf>,
}

pub fn resolve(common: &Common, file: &FileConfig) -> Result<Resolved> {
    let spec_text = need("channel", common.channel.clone().or_else(|| file.channel.clone()))?;
    let spec = ChannelSpec::parse(&spec_text).with_context(|| format!("channel = {spec_text:?}"))?;
    let eps = common.eps.or(file.eps).unwrap_or(DEFAULT_EPS);
    if !(eps > 0.0 && eps < 1.0) {
        bail!("eps = {eps}: must lie in (0, 1)");
    }
    Ok(Resolved { spec_text, spec, eps, output: common.output.clone().or_else(|| file.output.clone()) })
}

fn capacity_input(spec: &ChannelSpec) -> Result<Option<InputDist>> {
    match spec {
        ChannelSpec::Dmc(dmc) => Ok(Some(capacity(dmc, CAPACITY_TOL)?.1)),
        ChannelSpec::Awgn(_) => Ok(None),
    }
}

/// Bound constants at the capacity-achieving input.
pub fn constants(spec: &ChannelSpec) -> Result<BoundConstants> {
    Ok(match spec {
        ChannelSpec::Dmc(dmc) => BoundConstants::for_dmc(dmc, &capacity_input(spec)?.expect("dmc"))?,
        ChannelSpec::Awgn(chan) => BoundConstants::for_gaussian(chan)?,
    })
}

fn log_m(flag: &Option<String>, file: &FileConfig) -> Result<f64> {
    let s = flag.clone().or_else(|| file.m.clone()).unwrap_or_else(|| DEFAULT_M.to_string());
    parse_log_m(&s)
}

fn single_n(flag: &Option<String>, file: &FileConfig) -> Result<f64> {
    let s = need("N", flag.clone().or_else(|| file.n.clone()))?;
    let n: f64 = s.trim().parse().with_context(|| format!("N = {s:?} is not a number"))?;
    if !(n > 0.0) {
        bail!("N = {n}: must be positive");
    }
    Ok(n)
}

fn manual_params(log_m: f64, t: &Thresholds, file: &FileConfig) -> Result<VlfParams> {
    Ok(VlfParams::new(
        log_m,
        need("gamma1", t.gamma1.or(file.gamma1))?,
        need("gamma2", t.gamma2.or(file.gamma2))?,
        need("aA", t.a_accept.or(file.a_accept))?,
        need("aR", t.a_reject.or(file.a_reject))?,
        t.eps0.or(file.eps0).unwrap_or(0.0),
    )?)
}

fn universal_family(spec: &ChannelSpec, variant: Variant) -> UniversalFamily {
    match (spec, variant) {
        (ChannelSpec::Awgn(_), _) => UniversalFamily::Gaussian,
        (ChannelSpec::Dmc(_), Variant::UvlfBsc) => UniversalFamily::Bsc,
        (ChannelSpec::Dmc(d), _) => UniversalFamily::Dmc { ax: d.input_size(), ay: d.output_size() },
    }
}

fn universal_schedule(spec: &ChannelSpec, variant: Variant, log_m: f64, eps: f64, delta: f64) -> Result<(VlfParams, f64)> {
    let n1 = match spec {
        ChannelSpec::Dmc(d) => universal_n1(log_m, d.input_size(), d.output_size()),
        ChannelSpec::Awgn(_) => gaussian_n1(log_m),
    };
    let s = schedule_thm3(log_m, n1, universal_family(spec, variant), eps, delta)?;
    Ok((s.params, n1))
}

fn bound_row(scheme: &str, r: &BoundReport, p: &VlfParams, n1: Option<f64>, n2: Option<f64>) -> Vec<String> {
    vec![
        scheme.to_string(),
        real(r.n_avg),
        prob(r.eps),
        real(p.log_m),
        real(p.m_log2()),
        rate(r.rate_bits()),
        real(p.gamma1),
        real(p.gamma2),
        real(p.a_accept),
        real(p.a_reject),
        prob(p.eps0),
        prob(r.eps_prime),
        real(r.n_prime),
        opt(n1, real),
        opt(n2, real),
    ]
}

pub fn bound(a: BoundArgs, file: &FileConfig) -> Result<()> {
    let res = resolve(&a.common, file)?;
    let k = constants(&res.spec)?;
    let log_m = log_m(&a.m, file)?;
    let t = &a.thresholds;
    let manual_given = t.gamma1.or(file.gamma1).is_some();
    let schedule = a.schedule.clone().or_else(|| file.schedule.clone());
    let schedule = schedule.unwrap_or_else(|| if manual_given { "manual".into() } else { "thm2".into() });
    let (params, n1, n2) = match schedule.as_str() {
        "manual" => (manual_params(log_m, t, file)?, None, None),
        "thm2" => {
            let s = schedule_thm2_for_log_m(log_m, res.eps, &k)?;
            (s.params, Some(s.n1), None)
        }
        "thm3" => {
            let variant = variant_or(&a.variant, file, &res.spec, true)?;
            let delta = a.delta.or(file.delta).unwrap_or(DEFAULT_DELTA);
            let c2 = a.c2.or(file.c2).unwrap_or(DEFAULT_C2);
            if !(c2 > 1.0) {
                bail!("c2 = {c2}: must exceed 1");
            }
            let (p, n1) = universal_schedule(&res.spec, variant, log_m, res.eps, delta)?;
            (p, Some(n1), Some(c2 * p.gamma2 / k.capacity))
        }
        other => bail!("schedule = {other:?}: expected manual, thm2 or thm3"),
    };
    let r = theorem1_bound(&params, &k)?;
    let mut out = Sink::create(res.output.as_deref(), &BOUND_HEADER)?;
    out.row(bound_row(&schedule, &r, &params, n1, n2))?;
    out.flush()?;
    eprintln!(
        "{schedule}: log2 M = {:.3}, eps <= {:.3e}, N <= {:.3}, rate {:.6} bits/use",
        params.m_log2(),
        r.eps,
        r.n_avg,
        r.rate_bits()
    );
    Ok(())
}

pub fn optimize(a: OptimizeArgs, file: &FileConfig) -> Result<()> {
    let res = resolve(&a.common, file)?;
    let k = constants(&res.spec)?;
    let n = single_n(&a.n, file)?;
    let code = optimize_params(&k, res.eps, n)?;
    let mut out = Sink::create(res.output.as_deref(), &BOUND_HEADER)?;
    out.row(bound_row("optimize", &code.report, &code.params, None, None))?;
    out.flush()?;
    eprintln!(
        "optimize: N = {n}, eps = {:.3e}: log2 M = {:.3}, rate {:.6} bits/use",
        res.eps,
        code.params.m_log2(),
        code.report.rate_bits()
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SweepScheme {
    Thm1,
    Vlsf,
    Converse,
}

impl SweepScheme {
    fn name(self) -> &'static str {
        match self {
            Self::Thm1 => "thm1",
            Self::Vlsf => "vlsf",
            Self::Converse => "converse",
        }
    }
}

impl FromStr for SweepScheme {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "thm1" => Ok(Self::Thm1),
            "vlsf" => Ok(Self::Vlsf),
            "converse" => Ok(Self::Converse),
            other => bail!("schemes: unknown scheme {other:?} (expected thm1, vlsf, converse)"),
        }
    }
}

fn sweep_point(scheme: SweepScheme, k: &BoundConstants, eps: f64, n: f64) -> Result<Vec<String>> {
    let e = String::new;
    let row = |log_m: f64, g1: String, g2: String, aa: String, ar: String, eps0: String| {
        vec![
            real(n),
            prob(eps),
            real(log_m),
            rate(log_m / n / LN_2),
            g1,
            g2,
            aa,
            ar,
            eps0,
            real(log_m / LN_2),
            scheme.name().to_string(),
        ]
    };
    Ok(match scheme {
        SweepScheme::Thm1 => {
            let p = optimize_params(k, eps, n)?.params;
            row(p.log_m, real(p.gamma1), real(p.gamma2), real(p.a_accept), real(p.a_reject), prob(p.eps0))
        }
        SweepScheme::Vlsf => {
            let v = vlsf_from_constants(k.capacity, k.b, eps, n)?;
            row(v.log_m, real(v.gamma), e(), e(), e(), prob(v.eps0))
        }
        SweepScheme::Converse => row(converse_bound(k.capacity, eps, n), e(), e(), e(), e(), e()),
    })
}

pub fn sweep(a: SweepArgs, file: &FileConfig) -> Result<()> {
    let res = resolve(&a.common, file)?;
    let k = constants(&res.spec)?;
    let grid = parse_grid(&need("N", a.n.clone().or_else(|| file.n.clone()))?)?;
    if grid.iter().any(|&n| !(n > 0.0)) {
        bail!("N grid must be positive");
    }
    let schemes: Vec<SweepScheme> = a
        .schemes
        .clone()
        .or_else(|| file.schemes.clone())
        .unwrap_or_else(|| "thm1,vlsf,converse".into())
        .split(',')
        .map(str::parse)
        .collect::<Result<_>>()?;
    let resume = a.resume || file.resume.unwrap_or(false);

    let mut done: HashSet<(String, String)> = HashSet::new();
    let mut out = match (&res.output, resume) {
        (Some(path), true) => {
            for r in read_rows(path)?.iter().skip(1) {
                if r.len() == SWEEP_HEADER.len() {
                    done.insert((r[0].clone(), r[10].clone()));
                }
            }
            Sink::append(path, &SWEEP_HEADER)?
        }
        (None, true) => bail!("resume needs --output"),
        (path, false) => Sink::create(path.as_deref(), &SWEEP_HEADER)?,
    };

    let (mut written, mut skipped) = (0usize, 0usize);
    let mut last_err = None;
    for &n in &grid {
        for &s in &schemes {
            if done.contains(&(real(n), s.name().to_string())) {
                skipped += 1;
                continue;
            }
            match sweep_point(s, &k, res.eps, n) {
                Ok(row) => {
                    out.row(row)?;
                    written += 1;
                }
                Err(e) => {
                    eprintln!("skipping N = {n}, {}: {e:#}", s.name());
                    last_err = Some(e);
                }
            }
        }
        out.flush()?;
    }
    eprintln!("sweep: {written} rows written, {skipped} already present");
    match last_err {
        Some(e) if written == 0 && skipped == 0 => Err(e),
        _ => Ok(()),
    }
}

fn variant_or(flag: &Option<String>, file: &FileConfig, spec: &ChannelSpec, universal: bool) -> Result<Variant> {
    match flag.clone().or_else(|| file.variant.clone()) {
        Some(v) => Variant::from_str(&v).map_err(|e| anyhow!("variant = {v:?}: {e}")),
        None => Ok(match (spec, universal) {
            (ChannelSpec::Dmc(_), false) => Variant::VlfDmc,
            (ChannelSpec::Dmc(_), true) => Variant::UvlfDmc,
            (ChannelSpec::Awgn(_), false) => Variant::VlfAwgn,
            (ChannelSpec::Awgn(_), true) => Variant::UvlfAwgn,
        }),
    }
}

fn parse_route(s: &str) -> Result<CodebookRoute> {
    match s {
        "auto" => Ok(CodebookRoute::Auto),
        "explicit" => Ok(CodebookRoute::Explicit),
        "sampled" => Ok(CodebookRoute::Sampled),
        other => bail!("route = {other:?}: expected auto, explicit or sampled"),
    }
}

#[derive(Serialize)]
struct TraceLine<'a> {
    trial: u64,
    #[serde(flatten)]
    outcome: &'a TrialOutcome,
}

pub fn simulate(a: SimulateArgs, file: &FileConfig) -> Result<()> {
    let res = resolve(&a.common, file)?;
    let seed = need("seed", a.seed.or(file.seed))?;
    let variant = variant_or(&a.variant, file, &res.spec, false)?;
    let trials = a.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS);
    let workers = a.workers.or(file.workers).unwrap_or(0);
    let training = a.training.or(file.training).unwrap_or(DEFAULT_TRAINING);
    let delta = a.delta.or(file.delta).unwrap_or(DEFAULT_DELTA);

    let channel = match &res.spec {
        ChannelSpec::Dmc(dmc) => {
            let input = a.input.clone().or_else(|| file.input.clone());
            let default = if variant.is_universal() { "uniform" } else { "capacity" };
            let px = match input.as_deref().unwrap_or(default) {
                "uniform" => InputDist::uniform(dmc.input_size()),
                "capacity" => capacity_input(&res.spec)?.expect("dmc"),
                other => bail!("input = {other:?}: expected capacity or uniform"),
            };
            SchemeChannel::Dmc { dmc: dmc.clone(), px }
        }
        ChannelSpec::Awgn(chan) => SchemeChannel::Gaussian(*chan),
    };
    // Constants of the true channel at the codeword input, for the reference bound.
    let k = match &channel {
        SchemeChannel::Dmc { dmc, px } => BoundConstants::for_dmc(dmc, px)?,
        SchemeChannel::Gaussian(chan) => BoundConstants::for_gaussian(chan)?,
    };

    let schedule = a.schedule.clone().or_else(|| file.schedule.clone());
    let schedule = schedule.unwrap_or_else(|| if variant.is_universal() { "thm3".into() } else { "thm2".into() });
    let params = match schedule.as_str() {
        "thm2" => schedule_thm2_for_log_m(log_m(&a.m, file)?, res.eps, &k)?.params,
        "thm3" => universal_schedule(&res.spec, variant, log_m(&a.m, file)?, res.eps, delta)?.0,
        "optimize" => optimize_params(&k, res.eps, single_n(&a.n, file)?)?.params,
        "manual" => manual_params(log_m(&a.m, file)?, &a.thresholds, file)?,
        other => bail!("schedule = {other:?}: expected thm2, thm3, optimize or manual"),
    };

    let mut cfg = SchemeConfig::new(variant, channel, params, seed);
    cfg.training_len = if variant.is_universal() { training } else { 0 };
    cfg.honest_time_zero = a.honest_time_zero || file.honest_time_zero.unwrap_or(false);
    if let Some(r) = a.route.clone().or_else(|| file.route.clone()) {
        cfg.route = parse_route(&r)?;
    }
    if let Some(l) = a.explicit_limit.or(file.explicit_limit) {
        cfg.explicit_limit = l;
    }
    cfg.n_max = a.n_max.or(file.n_max);
    if let (None, Some(f)) = (cfg.n_max, a.horizon_factor.or(file.horizon_factor)) {
        if !(f > 0.0) {
            bail!("horizon_factor = {f}: must be positive");
        }
        let c = Simulator::new(cfg.clone())?.capacity_estimate();
        cfg.n_max = Some((f * params.gamma2 / c).ceil() as u64);
    }
    let sim = Simulator::new(cfg)?;

    let trace_path = a.trace.clone().or_else(|| file.trace.clone());
    let mut trace = match &trace_path {
        Some(p) => Some(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => None,
    };
    let mut trace_err = None;
    let est = sim.run_with(trials, workers, |i, o| {
        if let (Some(w), None) = (trace.as_mut(), &trace_err) {
            let line = serde_json::to_string(&TraceLine { trial: i, outcome: o }).expect("serializable");
            if let Err(e) = writeln!(w, "{line}") {
                trace_err = Some(e);
            }
        }
    })?;
    if let Some(w) = trace.as_mut() {
        w.flush()?;
    }
    if let Some(e) = trace_err {
        return Err(e).context("writing trace");
    }

    let reference = (!variant.is_universal()).then(|| theorem1_bound(&params, &k)).transpose()?;
    let route = match sim.explicit_m() {
        Some(m) => format!("explicit:{m}"),
        None => "sampled".into(),
    };
    let ci = |m: Option<vlf_core::engine::MeanCi>| (m.map(|c| c.mean), m.map(|c| c.lo), m.map(|c| c.hi));
    let (pw, pw_lo, pw_hi) = ci(est.power_hat);
    let row = vec![
        variant.name().to_string(),
        res.spec_text.clone(),
        seed.to_string(),
        trials.to_string(),
        schedule.clone(),
        real(params.log_m),
        real(params.m_log2()),
        real(params.gamma1),
        real(params.gamma2),
        real(params.a_accept),
        real(params.a_reject),
        prob(params.eps0),
        sim.config().training_len.to_string(),
        sim.n_max().to_string(),
        route,
        prob(est.eps_hat),
        prob(est.eps_ci.0),
        prob(est.eps_ci.1),
        real(est.n_hat.mean),
        opt(Some(est.n_hat.lo), real),
        opt(Some(est.n_hat.hi), real),
        opt(pw, real),
        opt(pw_lo, real),
        opt(pw_hi, real),
        prob(est.censor_rate),
        est.stopped_at_zero.to_string(),
        est.entered_c2.to_string(),
        opt(reference.map(|r| r.eps), prob),
        opt(reference.map(|r| r.n_avg), real),
    ];
    let mut out = match &res.output {
        Some(p) => Sink::append(p, &SIMULATE_HEADER)?,
        None => Sink::create(None, &SIMULATE_HEADER)?,
    };
    out.row(row)?;
    out.flush()?;
    eprintln!(
        "{}: eps_hat = {:.3e} [{:.3e}, {:.3e}], n_hat = {:.3}, rate {:.6} bits/use over {trials} trials ({} censored)",
        variant.name(),
        est.eps_hat,
        est.eps_ci.0,
        est.eps_ci.1,
        est.n_hat.mean,
        params.log_m / est.n_hat.mean / LN_2,
        est.censored
    );
    Ok(())
}
