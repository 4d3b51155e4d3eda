use super::*;
use crate::bounds::{b_constant, theorem1_bound, BoundConstants, DiscreteLaw};
use crate::oracle::{exact_sprt, LatticeWalkSpec};

fn bsc_channel(p: f64) -> SchemeChannel {
    SchemeChannel::Dmc { dmc: Dmc::bsc(p).unwrap(), px: InputDist::uniform(2) }
}

fn params(log_m: f64, g1: f64, g2: f64, a_a: f64, a_r: f64, eps0: f64) -> VlfParams {
    VlfParams::new(log_m, g1, g2, a_a, a_r, eps0).unwrap()
}

fn run(cfg: SchemeConfig, trials: u64) -> McEstimate {
    Simulator::new(cfg).unwrap().run(trials, 0).unwrap()
}

#[test]
fn near_noiseless_bsc_decodes() {
    let cfg = SchemeConfig::new(Variant::VlfDmc, bsc_channel(1e-4), params(2f64.ln(), 1.0, 2.0, 5.0, 5.0, 0.0), 11);
    let est = run(cfg, 10_000);
    assert!(1.0 - est.eps_hat >= 0.999, "{est:?}");
}

#[test]
fn eps0_one_stops_everything_at_zero() {
    let mut cfg = SchemeConfig::new(Variant::VlfDmc, bsc_channel(0.11), params(10.0, 12.0, 14.0, 3.0, 3.0, 1.0), 5);
    let sim = Simulator::new(cfg.clone()).unwrap();
    let est = sim
        .run_with(500, 0, |_, o| {
            assert!(o.stopped_at_zero && o.tau == 0 && !o.correct);
        })
        .unwrap();
    assert_eq!(est.stopped_at_zero, 500);
    assert_eq!(est.errors, 500);

    cfg.honest_time_zero = true;
    cfg.params.log_m = 2f64.ln();
    cfg.params.gamma1 = 2.0;
    cfg.params.gamma2 = 3.0;
    let est = run(cfg, 20_000);
    assert!((est.eps_hat - 0.5).abs() < 4.0 * (0.25f64 / 20_000.0).sqrt(), "{}", est.eps_hat);
}

#[test]
fn phase_lengths_add_up() {
    let cfg = SchemeConfig::new(Variant::VlfDmc, bsc_channel(0.11), params(64f64.ln(), 5.0, 6.5, 2.0, 2.0, 0.1), 3);
    let sim = Simulator::new(cfg).unwrap();
    sim.run_with(3000, 0, |_, o| {
        if o.stopped_at_zero {
            assert_eq!(o.tau, 0);
        } else if !o.censored {
            assert_eq!(o.tau, o.len_c1 + o.len_ht + o.len_c2);
            assert!(o.len_c1 >= 1 && o.len_ht >= 1);
            if !o.entered_c2 {
                assert_eq!(o.len_c2, 0);
            }
        }
    })
    .unwrap();
}

#[test]
fn tiny_reject_threshold_sends_wrong_estimates_to_c2() {
    // With a_A large a wrong first estimate is accepted with probability at
    // most e^{-a_A}, so every error passes through C2.
    let cfg = SchemeConfig::new(Variant::VlfDmc, bsc_channel(0.11), params(64f64.ln(), 4.0, 9.0, 12.0, 1e-6, 0.0), 8);
    let sim = Simulator::new(cfg).unwrap();
    let mut seen_c2 = 0;
    sim.run_with(4000, 0, |_, o| {
        if !o.correct && !o.censored {
            assert!(o.entered_c2);
        }
        if o.entered_c2 {
            seen_c2 += 1;
        }
    })
    .unwrap();
    assert!(seen_c2 > 0);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    for (variant, channel, route) in [
        (Variant::VlfDmc, bsc_channel(0.11), CodebookRoute::Explicit),
        (Variant::VlfDmc, bsc_channel(0.11), CodebookRoute::Sampled),
        (Variant::UvlfDmc, bsc_channel(0.11), CodebookRoute::Sampled),
        (Variant::VlfAwgn, SchemeChannel::Gaussian(GaussianChannel::from_snr(1.0).unwrap()), CodebookRoute::Sampled),
    ] {
        let mut cfg = SchemeConfig::new(variant, channel, params(64f64.ln(), 6.0, 8.0, 2.0, 2.0, 0.02), 99);
        cfg.training_len = 1000;
        cfg.route = route;
        let sim = Simulator::new(cfg).unwrap();
        let one = sim.run(20_000, 1).unwrap();
        let eight = sim.run(20_000, 8).unwrap();
        assert_eq!(one, eight);
        assert_eq!(sim.trial(17).unwrap(), sim.trial(17).unwrap());
    }
}

#[test]
fn single_trial_flags_degenerate_interval() {
    let cfg = SchemeConfig::new(Variant::VlfDmc, bsc_channel(0.11), params(4.0, 5.0, 6.0, 2.0, 2.0, 0.0), 1);
    let est = run(cfg.clone(), 1);
    assert!(est.degenerate_ci);
    assert!(matches!(Simulator::new(cfg).unwrap().run(0, 1), Err(EngineError::NoTrials)));
}

/// The explicit codebook and the Poisson sampler simulate the same
/// ensemble, so their statistics agree within Monte-Carlo error.
fn cross_check(variant: Variant, channel: SchemeChannel, p: VlfParams) {
    let trials = 20_000;
    let mut cfg = SchemeConfig::new(variant, channel, p, 2024);
    cfg.training_len = 100_000;
    cfg.route = CodebookRoute::Explicit;
    let ex = run(cfg.clone(), trials);
    cfg.route = CodebookRoute::Sampled;
    cfg.seed = 4048;
    let sa = run(cfg, trials);
    let n = trials as f64;
    let se_p = |a: f64, b: f64| ((a * (1.0 - a) + b * (1.0 - b)) / n).sqrt();
    assert!(
        (ex.eps_hat - sa.eps_hat).abs() <= 4.0 * se_p(ex.eps_hat, sa.eps_hat) + 1e-3,
        "{variant}: eps {} vs {}",
        ex.eps_hat,
        sa.eps_hat
    );
    let (c_ex, c_sa) = (ex.entered_c2 as f64 / n, sa.entered_c2 as f64 / n);
    assert!((c_ex - c_sa).abs() <= 4.0 * se_p(c_ex, c_sa) + 1e-3, "{variant}: C2 rate {c_ex} vs {c_sa}");
    let se_n = ((ex.n_hat.hi - ex.n_hat.lo).powi(2) + (sa.n_hat.hi - sa.n_hat.lo).powi(2)).sqrt() / (2.0 * Z95);
    assert!(
        (ex.n_hat.mean - sa.n_hat.mean).abs() <= 4.0 * se_n,
        "{variant}: tau {} vs {}",
        ex.n_hat.mean,
        sa.n_hat.mean
    );
    assert!(ex.eps_hat > 0.01, "{variant}: configuration should produce errors, got {}", ex.eps_hat);
}

const Z95: f64 = crate::numeric::Z_95;

#[test]
fn sampler_matches_explicit_known_dmc() {
    cross_check(Variant::VlfDmc, bsc_channel(0.11), params(64f64.ln(), 4.5, 6.0, 1.5, 1.5, 0.0));
}

#[test]
fn sampler_matches_explicit_universal_dmc() {
    cross_check(Variant::UvlfDmc, bsc_channel(0.11), params(64f64.ln(), 6.0, 7.5, 1.5, 1.5, 0.0));
}

#[test]
fn sampler_matches_explicit_universal_bsc() {
    cross_check(Variant::UvlfBsc, bsc_channel(0.11), params(64f64.ln(), 5.0, 6.5, 1.5, 1.5, 0.0));
}

#[test]
fn sampler_matches_explicit_gaussian() {
    let ch = SchemeChannel::Gaussian(GaussianChannel::from_snr(1.0).unwrap());
    cross_check(Variant::VlfAwgn, ch, params(64f64.ln(), 4.5, 6.0, 1.5, 1.5, 0.0));
}

#[test]
fn ternary_universal_sampler_matches_explicit() {
    let dmc = Dmc::new(vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.7, 0.2], vec![0.2, 0.1, 0.7]]).unwrap();
    let ch = SchemeChannel::Dmc { dmc, px: InputDist::uniform(3) };
    cross_check(Variant::UvlfDmc, ch, params(32f64.ln(), 7.0, 8.5, 1.5, 1.5, 0.0));
}

#[test]
fn simulation_respects_the_bound() {
    let dmc = Dmc::bsc(0.11).unwrap();
    let px = InputDist::uniform(2);
    let k = BoundConstants::for_dmc(&dmc, &px).unwrap();
    let p = params(256f64.ln(), 9.0, 11.0, 3.0, 3.0, 0.0);
    let bound = theorem1_bound(&p, &k).unwrap();
    let est = run(SchemeConfig::new(Variant::VlfDmc, SchemeChannel::Dmc { dmc, px }, p, 77), 20_000);
    assert!(est.eps_ci.1 <= bound.eps, "{:?} vs {}", est.eps_ci, bound.eps);
    assert!(est.n_hat.hi <= bound.n_avg, "{:?} vs {}", est.n_hat, bound.n_avg);
}

#[test]
fn gaussian_power_accounting() {
    let ch = SchemeChannel::Gaussian(GaussianChannel::from_snr(1.0).unwrap());
    let est = run(SchemeConfig::new(Variant::VlfAwgn, ch, params(40.0, 42.0, 45.0, 4.0, 4.0, 0.0), 5), 4000);
    let excess = est.energy_excess.unwrap();
    assert!(excess.lo <= 0.0, "{excess:?}");
    let power = est.power_hat.unwrap();
    assert!(power.lo <= 1.0 && power.hi >= 1.0 - 0.05, "{power:?}");
}

#[test]
fn universal_gaussian_runs_explicitly() {
    let mut cfg = SchemeConfig::new(
        Variant::UvlfAwgn,
        SchemeChannel::Gaussian(GaussianChannel::from_snr(1.0).unwrap()),
        params(16f64.ln(), 6.0, 8.0, 3.0, 3.0, 0.0),
        4,
    );
    cfg.training_len = 1000;
    let est = run(cfg.clone(), 2000);
    assert!(est.eps_hat < 0.2 && est.censored == 0, "{est:?}");
    cfg.params.log_m = 100.0;
    cfg.params.gamma1 = 110.0;
    cfg.params.gamma2 = 120.0;
    assert!(matches!(Simulator::new(cfg), Err(EngineError::SamplerUnsupported(_))));
}

#[test]
fn configuration_errors() {
    let p = params(4.0, 5.0, 6.0, 2.0, 2.0, 0.0);
    let mut cfg = SchemeConfig::new(Variant::UvlfDmc, bsc_channel(0.11), p, 1);
    cfg.training_len = 1;
    assert!(matches!(Simulator::new(cfg.clone()), Err(EngineError::InsufficientTraining { needed: 2, got: 1 })));
    cfg.variant = Variant::VlfAwgn;
    assert!(matches!(Simulator::new(cfg.clone()), Err(EngineError::InvalidConfig(_))));
    cfg.variant = Variant::VlfDmc;
    cfg.n_max = Some(5);
    assert!(matches!(Simulator::new(cfg.clone()), Err(EngineError::InvalidConfig(_))));
    cfg.n_max = None;
    cfg.route = CodebookRoute::Explicit;
    cfg.params.log_m = 4.0;
    assert!(matches!(Simulator::new(cfg), Err(EngineError::InvalidConfig(_))));
    let ch = SchemeChannel::Dmc { dmc: Dmc::new(vec![vec![0.5, 0.5], vec![0.4, 0.6], vec![0.1, 0.9]]).unwrap(), px: InputDist::uniform(3) };
    let mut cfg = SchemeConfig::new(Variant::UvlfBsc, ch, p, 1);
    cfg.training_len = 30;
    assert!(matches!(Simulator::new(cfg), Err(EngineError::InvalidConfig(_))));
    assert_eq!("uvlf_bsc".parse::<Variant>().unwrap(), Variant::UvlfBsc);
    assert!("nope".parse::<Variant>().is_err());
}

#[test]
fn training_estimates_concentrate() {
    for seed in 0..5 {
        let mut cfg = SchemeConfig::new(Variant::UvlfDmc, bsc_channel(0.11), params(4.0, 5.0, 6.0, 2.0, 2.0, 0.0), seed);
        cfg.training_len = 1_000_000;
        let EmpiricalChannel::Dmc { rows, samples } = estimate_channel(&cfg).unwrap() else { panic!() };
        assert_eq!(samples, vec![500_000, 500_000]);
        let truth = [[0.89, 0.11], [0.11, 0.89]];
        for x in 0..2 {
            for y in 0..2 {
                assert!((rows[x][y] - truth[x][y]).abs() < 0.005);
            }
        }
        let mut g = cfg.clone();
        g.channel = SchemeChannel::Gaussian(GaussianChannel::from_snr(1.0).unwrap());
        g.training_len = 10_000;
        let EmpiricalChannel::Gaussian { noise_var, .. } = estimate_channel(&g).unwrap() else { panic!() };
        assert!((0.95..=1.05).contains(&noise_var), "{noise_var}");
    }
}

#[test]
fn sprt_error_probabilities_match_exact_walk() {
    let dmc = Dmc::bsc(0.11).unwrap();
    let cp = control_pair(&dmc).unwrap();
    let (accept_law, _) = DiscreteLaw::control_llrs(&dmc, cp.x_accept, cp.x_reject);
    let a = 4.0;
    let exact = exact_sprt(&LatticeWalkSpec::from_law(&accept_law, -a, a, 10_000)).unwrap();
    assert!(exact.p_reject <= (-a).exp());
    let mut rng = trial_rng(3, 0);
    let trials = 200_000u64;
    let mut rejects = 0u64;
    let link = KnownDmc::new(&dmc, &InputDist::uniform(2), cp.x_accept, cp.x_reject).unwrap();
    for _ in 0..trials {
        let llrs = std::iter::repeat_with(|| link.ht_llr(link.channel(cp.x_accept, &mut rng)));
        if sprt(llrs, a, a, 10_000).unwrap().decision == SprtDecision::Reject {
            rejects += 1;
        }
    }
    let p = rejects as f64 / trials as f64;
    let se = (exact.p_reject * (1.0 - exact.p_reject) / trials as f64).sqrt();
    assert!((p - exact.p_reject).abs() <= 4.0 * se, "{p} vs {}", exact.p_reject);
}

#[test]
fn lorden_bound_holds_for_information_density_walk() {
    let dmc = Dmc::bsc(0.11).unwrap();
    let px = InputDist::uniform(2);
    let c = dmc.mutual_information(&px).unwrap();
    let b = b_constant(&DiscreteLaw::information_density(&dmc, &px).unwrap()).unwrap();
    let sim = Simulator::new(SchemeConfig::new(Variant::VlfDmc, SchemeChannel::Dmc { dmc, px }, params(30.0, 31.0, 35.0, 2.0, 2.0, 0.0), 6)).unwrap();
    for gamma in [5.0, 15.0, 30.0] {
        let est = sim.passage_time(gamma, 20_000, 0).unwrap();
        assert_eq!(est.censored, 0);
        assert!(est.mean.lo <= (gamma + b) / c, "{gamma}: {:?} vs {}", est.mean, (gamma + b) / c);
    }
}
