use std::path::Path;
use std::process::{Command, Output};

use vlf_core::bounds::{theorem1_bound, BoundConstants, VlfParams};
use vlf_core::channel::{Dmc, InputDist};

fn vlf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlf")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = vlf(args);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
    stdout(&o)
}

fn header(csv: &str) -> &str {
    csv.lines().next().unwrap()
}

const BOUND_HEADER: &str =
    "scheme,N,eps,logM_nats,M_log2,rate_bits_per_use,gamma1,gamma2,aA,aR,eps0,eps_prime,N_prime,n1,n2";

#[test]
fn golden_headers() {
    let bound = ok(&["bound", "--channel", "bsc:0.11", "--M", "2^100", "--eps", "0.01"]);
    assert_eq!(header(&bound), BOUND_HEADER);
    let optimize = ok(&["optimize", "--channel", "bsc:0.11", "--eps", "1e-3", "--N", "500"]);
    assert_eq!(header(&optimize), BOUND_HEADER);
    let sweep = ok(&["sweep", "--channel", "bsc:0.11", "--eps", "1e-3", "--N", "500"]);
    assert_eq!(header(&sweep), "N,eps,logM_nats,rate_bits_per_use,gamma1,gamma2,aA,aR,eps0,M_log2,scheme");
    let sim = ok(&["simulate", "--channel", "bsc:0.11", "--M", "16", "--eps", "0.2", "--trials", "50", "--seed", "1"]);
    assert_eq!(
        header(&sim),
        "variant,channel,seed,trials,schedule,logM_nats,M_log2,gamma1,gamma2,aA,aR,eps0,training,n_max,route,\
         eps_hat,eps_lo,eps_hi,n_hat,n_lo,n_hi,power_hat,power_lo,power_hi,censor_rate,stopped_at_zero,entered_c2,\
         eps_bound,N_bound"
    );
    for sub in [
        vec!["oracle", "sprt", "--channel", "bsc:0.11"],
        vec!["oracle", "mi-tail", "--n", "4"],
        vec!["oracle", "eta", "--n", "10"],
        vec!["oracle", "lorden", "--channel", "bsc:0.11", "--gammas", "5"],
        vec!["oracle", "corr-tail"],
    ] {
        assert_eq!(header(&ok(&sub)), "n,gamma,exact,bound,ratio", "{sub:?}");
    }
}

#[test]
fn golden_rows() {
    let bound = ok(&["bound", "--channel", "bsc:0.11", "--M", "2^100", "--eps", "0.01"]);
    assert_eq!(
        bound.lines().nth(1).unwrap(),
        "thm2,213.296875,1.00e-2,69.314718,100.000000,0.468830,70.988087,74.644812,5.330094,5.330094,4.27e-3,5.75e-3,\
         214.212039,206.457374,"
    );
    let eta = ok(&["oracle", "eta", "--n", "1,2"]);
    assert_eq!(eta, "n,gamma,exact,bound,ratio\n1,,2.000000,1.253314,1.595769\n2,,2.500000,1.772454,1.410474\n");
    let tail = ok(&["oracle", "corr-tail", "--n", "200", "--a", "0.3"]);
    assert_eq!(tail.lines().nth(1).unwrap(), "200,0.300000,7.56e-6,2.28e-5,0.332395");
}

#[test]
fn manual_bound_matches_library() {
    let out = ok(&[
        "bound", "--channel", "bsc:0.11", "--M", "2^100", "--gamma1", "72", "--gamma2", "76", "--aA", "5", "--aR", "4",
        "--eps0", "0.002",
    ]);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    let k = BoundConstants::for_dmc(&Dmc::bsc(0.11).unwrap(), &InputDist::uniform(2)).unwrap();
    let p = VlfParams::new(100.0 * std::f64::consts::LN_2, 72.0, 76.0, 5.0, 4.0, 0.002).unwrap();
    let r = theorem1_bound(&p, &k).unwrap();
    assert_eq!(row[0], "manual");
    assert_eq!(row[1], format!("{:.6}", r.n_avg));
    assert_eq!(row[2], format!("{:.2e}", r.eps));
    assert_eq!(row[5], format!("{:.6}", r.rate_bits()));
    assert_eq!(row[11], format!("{:.2e}", r.eps_prime));
    assert_eq!(row[12], format!("{:.6}", r.n_prime));
}

#[test]
fn exit_codes() {
    // infeasible targets
    let o = vlf(&["bound", "--channel", "bsc:0.11", "--M", "2^100", "--eps", "1e-4"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = vlf(&["bound", "--channel", "bsc:0.11", "--schedule", "thm3", "--M", "2^60", "--eps", "0.01"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = vlf(&["simulate", "--channel", "bsc:0.11", "--M", "2^100", "--eps", "1e-4", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    // configuration errors
    let o = vlf(&["simulate", "--channel", "bsc:0.11", "--trials", "10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));
    let o = vlf(&["bound", "--channel", "bsc:1.5"]);
    assert_eq!(o.status.code(), Some(1));
    let o = vlf(&["bound", "--M", "2^10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("channel"));
    let o = vlf(&["bound", "--channel", "bsc:0.11", "--eps", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("eps"));
    let o = vlf(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    let o = vlf(&["simulate", "--channel", "awgn:1", "--variant", "uvlf_awgn", "--route", "sampled", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(vlf(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "channel = \"bsc:0.11\"\nM = \"2^100\"\neps = 0.01\n").unwrap();
    let cfg_s = cfg.to_str().unwrap();
    let from_file = ok(&["bound", "--config", cfg_s]);
    let direct = ok(&["bound", "--channel", "bsc:0.11", "--M", "2^100", "--eps", "0.01"]);
    assert_eq!(from_file, direct);
    let overridden = ok(&["bound", "--config", cfg_s, "--eps", "0.02"]);
    assert!(overridden.lines().nth(1).unwrap().contains(",2.00e-2,"));

    std::fs::write(&cfg, "channel = \"bsc:0.11\"\nbogus_key = 3\n").unwrap();
    let o = vlf(&["bound", "--config", cfg_s]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus_key"), "{}", stderr(&o));
}

fn sim_args<'a>(seed: &'a str, workers: &'a str) -> Vec<&'a str> {
    vec![
        "simulate", "--variant", "uvlf_dmc", "--channel", "bsc:0.11", "--training", "100000", "--trials", "3000",
        "--seed", seed, "--workers", workers,
    ]
}

#[test]
fn simulate_is_deterministic() {
    let a = ok(&sim_args("7", "1"));
    let b = ok(&sim_args("7", "1"));
    let c = ok(&sim_args("7", "3"));
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_ne!(a, ok(&sim_args("8", "1")));
}

#[test]
fn simulate_appends_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results.csv");
    let trace = dir.path().join("trace.jsonl");
    let base = ["simulate", "--channel", "bsc:0.11", "--M", "64", "--eps", "0.15", "--trials", "200"];
    let mut args: Vec<&str> = base.to_vec();
    args.extend(["--seed", "3", "--output", out.to_str().unwrap(), "--trace", trace.to_str().unwrap()]);
    ok(&args);
    let mut again: Vec<&str> = base.to_vec();
    again.extend(["--seed", "4", "--output", out.to_str().unwrap()]);
    ok(&again);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("variant,"));
    assert!(lines[1].contains(",explicit:64,"));

    let traces: Vec<serde_json::Value> = std::fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(traces.len(), 200);
    for (i, t) in traces.iter().enumerate() {
        assert_eq!(t["trial"], i as u64);
        let sum = ["len_c1", "len_ht", "len_c2"].iter().map(|k| t[k].as_u64().unwrap()).sum::<u64>();
        if !t["censored"].as_bool().unwrap() {
            assert_eq!(t["tau"].as_u64().unwrap(), sum);
        }
    }
}

fn rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn sweep_resume_fills_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = out.to_str().unwrap();
    ok(&["sweep", "--channel", "bsc:0.11", "--eps", "1e-3", "--N", "200:600:200", "--output", o]);
    let first = rows(&out);
    assert_eq!(first.len(), 1 + 3 * 3);
    ok(&["sweep", "--channel", "bsc:0.11", "--eps", "1e-3", "--N", "200:1000:200", "--output", o, "--resume"]);
    let second = rows(&out);
    assert_eq!(second.len(), 1 + 5 * 3);
    assert_eq!(&second[..first.len()], &first[..]);
    let fresh = dir.path().join("fresh.csv");
    ok(&["sweep", "--channel", "bsc:0.11", "--eps", "1e-3", "--N", "200:1000:200", "--output", fresh.to_str().unwrap()]);
    let mut a = second.clone();
    let mut b = rows(&fresh);
    a.sort();
    b.sort();
    assert_eq!(a, b);
}

#[test]
fn sweep_orders_schemes() {
    let out = ok(&["sweep", "--channel", "bsc:0.11", "--eps", "1e-3", "--N", "500:4000:500"]);
    let mut by_n: std::collections::BTreeMap<String, Vec<(String, f64)>> = Default::default();
    for line in out.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        by_n.entry(f[0].to_string()).or_default().push((f[10].to_string(), f[3].parse().unwrap()));
    }
    assert_eq!(by_n.len(), 8);
    for (n, pts) in by_n {
        let get = |s: &str| pts.iter().find(|p| p.0 == s).unwrap().1;
        assert!(get("thm1") > get("vlsf") && get("thm1") < get("converse"), "N = {n}: {pts:?}");
    }
}
