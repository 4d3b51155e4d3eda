//! Per-variant channel, codebook ensemble and decoding metric.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::{gaussian_information_density, information_density_table, Dmc, GaussianChannel, InputDist};
use crate::numeric::ln_gamma;
use crate::types::universal_gaussian_metric_from_sums;

/// Everything a trial needs to know about one scheme variant.
///
/// `advance` folds one (codeword symbol, output) pair into a message's
/// metric state and returns the updated metric. The sampled codebook route
/// draws wrong codewords from `propose` instead of the prior; the returned
/// increment is `ln P(x) - ln Q(x)`, and `log_regret` bounds
/// `ln P/Q + metric` over every prefix of the given outputs.
pub(crate) trait Link: Sync {
    type In: Copy + Send;
    type Out: Copy + Send;
    type State: Clone + Send;

    fn draw_input<R: Rng>(&self, rng: &mut R) -> Self::In;
    fn channel<R: Rng>(&self, x: Self::In, rng: &mut R) -> Self::Out;
    fn energy(&self, _x: Self::In) -> f64 {
        0.0
    }
    fn fresh(&self) -> Self::State;
    fn advance(&self, s: &mut Self::State, x: Self::In, y: Self::Out) -> f64;
    fn can_sample(&self) -> bool {
        true
    }
    fn propose<R: Rng>(&self, s: &Self::State, y: Self::Out, rng: &mut R) -> (Self::In, f64);
    fn log_regret(&self, _ys: &[Self::Out]) -> f64 {
        0.0
    }
    fn control_symbol(&self, accept: bool) -> Self::In;
    fn ht_llr(&self, y: Self::Out) -> f64;
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut c: Vec<f64> = p
        .iter()
        .map(|&v| {
            acc += v;
            acc
        })
        .collect();
    if let Some(last) = c.last_mut() {
        *last = f64::INFINITY;
    }
    c
}

#[inline]
fn pick<R: Rng>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

/// `ln P/P_KT` worst case over an `a`-ary sequence of length `m`:
/// `ln Gamma(m + a/2) - ln Gamma(m + 1/2) + ln Gamma(1/2) - ln Gamma(a/2)`.
/// Attained by a constant sequence; non-decreasing in `m`.
pub(crate) fn kt_regret(a: usize, m: u64) -> f64 {
    let h = a as f64 / 2.0;
    let m = m as f64;
    ln_gamma(m + h) - ln_gamma(m + 0.5) + ln_gamma(0.5) - ln_gamma(h)
}

#[inline]
fn dxlogx(k: u32) -> f64 {
    // (k+1) ln(k+1) - k ln k
    let k = k as f64;
    let next = (k + 1.0) * (k + 1.0).ln();
    if k > 0.0 {
        next - k * k.ln()
    } else {
        next
    }
}

/// Output sampler and control-phase LLR shared by the DMC links.
#[derive(Debug, Clone)]
struct DmcCore {
    ax: usize,
    ay: usize,
    input_cdf: Vec<f64>,
    ln_px: Vec<f64>,
    row_cdf: Vec<Vec<f64>>,
    x_accept: usize,
    x_reject: usize,
    /// LLR per output symbol for the control phase.
    llr: Vec<f64>,
}

impl DmcCore {
    fn new(dmc: &Dmc, px: &InputDist, ht_rows: &[Vec<f64>], x_accept: usize, x_reject: usize) -> Self {
        let llr = (0..dmc.output_size())
            .map(|y| {
                let (a, r) = (ht_rows[x_accept][y], ht_rows[x_reject][y]);
                if a == 0.0 && r == 0.0 {
                    0.0
                } else {
                    (a / r).ln()
                }
            })
            .collect();
        Self {
            ax: dmc.input_size(),
            ay: dmc.output_size(),
            input_cdf: cumulative(px.probs()),
            ln_px: px.probs().iter().map(|p| p.ln()).collect(),
            row_cdf: dmc.rows().iter().map(|r| cumulative(r)).collect(),
            x_accept,
            x_reject,
            llr,
        }
    }
}

/// Known DMC with the information-density metric.
#[derive(Debug, Clone)]
pub(crate) struct KnownDmc {
    core: DmcCore,
    idens: Vec<f64>,
    posterior_cdf: Vec<Vec<f64>>,
}

impl KnownDmc {
    pub(crate) fn new(dmc: &Dmc, px: &InputDist, x_accept: usize, x_reject: usize) -> Result<Self, crate::channel::ChannelError> {
        let table = information_density_table(px, dmc)?;
        let py = dmc.output_dist(px)?;
        let posterior_cdf = (0..dmc.output_size())
            .map(|y| {
                let post: Vec<f64> = (0..dmc.input_size()).map(|x| px.probs()[x] * dmc.prob(x, y) / py[y]).collect();
                cumulative(&post)
            })
            .collect();
        Ok(Self {
            core: DmcCore::new(dmc, px, &dmc.rows(), x_accept, x_reject),
            idens: table.concat(),
            posterior_cdf,
        })
    }
}

impl Link for KnownDmc {
    type In = usize;
    type Out = usize;
    type State = f64;

    fn draw_input<R: Rng>(&self, rng: &mut R) -> usize {
        pick(&self.core.input_cdf, rng)
    }
    fn channel<R: Rng>(&self, x: usize, rng: &mut R) -> usize {
        pick(&self.core.row_cdf[x], rng)
    }
    fn fresh(&self) -> f64 {
        0.0
    }
    fn advance(&self, s: &mut f64, x: usize, y: usize) -> f64 {
        *s += self.idens[x * self.core.ay + y];
        *s
    }
    fn propose<R: Rng>(&self, _s: &f64, y: usize, rng: &mut R) -> (usize, f64) {
        let x = pick(&self.posterior_cdf[y], rng);
        (x, -self.idens[x * self.core.ay + y])
    }
    fn control_symbol(&self, accept: bool) -> usize {
        if accept {
            self.core.x_accept
        } else {
            self.core.x_reject
        }
    }
    fn ht_llr(&self, y: usize) -> f64 {
        self.core.llr[y]
    }
}

/// Joint-type state of one message under the empirical-MI metric.
#[derive(Debug, Clone)]
pub(crate) struct TypeState {
    counts: Vec<u32>,
    rows: Vec<u32>,
    cols: Vec<u32>,
    n: u32,
    // sum c ln c over the joint counts, the row counts and the column counts
    joint: f64,
    row_sum: f64,
    col_sum: f64,
}

impl TypeState {
    fn metric(&self) -> f64 {
        let n = self.n as f64;
        let nln = if self.n > 0 { n * n.ln() } else { 0.0 };
        (self.joint + nln - self.row_sum - self.col_sum).max(0.0)
    }
}

/// Unknown DMC with the empirical mutual information metric and an
/// estimated control phase.
#[derive(Debug, Clone)]
pub(crate) struct UniversalDmc {
    core: DmcCore,
}

impl UniversalDmc {
    pub(crate) fn new(dmc: &Dmc, px: &InputDist, estimate: &[Vec<f64>], x_accept: usize, x_reject: usize) -> Self {
        Self { core: DmcCore::new(dmc, px, estimate, x_accept, x_reject) }
    }
}

impl Link for UniversalDmc {
    type In = usize;
    type Out = usize;
    type State = TypeState;

    fn draw_input<R: Rng>(&self, rng: &mut R) -> usize {
        pick(&self.core.input_cdf, rng)
    }
    fn channel<R: Rng>(&self, x: usize, rng: &mut R) -> usize {
        pick(&self.core.row_cdf[x], rng)
    }
    fn fresh(&self) -> TypeState {
        TypeState {
            counts: vec![0; self.core.ax * self.core.ay],
            rows: vec![0; self.core.ax],
            cols: vec![0; self.core.ay],
            n: 0,
            joint: 0.0,
            row_sum: 0.0,
            col_sum: 0.0,
        }
    }
    fn advance(&self, s: &mut TypeState, x: usize, y: usize) -> f64 {
        let c = &mut s.counts[x * self.core.ay + y];
        s.joint += dxlogx(*c);
        *c += 1;
        s.row_sum += dxlogx(s.rows[x]);
        s.rows[x] += 1;
        s.col_sum += dxlogx(s.cols[y]);
        s.cols[y] += 1;
        s.n += 1;
        s.metric()
    }
    /// Krichevsky-Trofimov estimate of `x` within the class of `y`.
    fn propose<R: Rng>(&self, s: &TypeState, y: usize, rng: &mut R) -> (usize, f64) {
        let ax = self.core.ax;
        let denom = s.cols[y] as f64 + ax as f64 / 2.0;
        let u: f64 = rng.random::<f64>() * denom;
        let mut acc = 0.0;
        let mut x = ax - 1;
        for cand in 0..ax {
            acc += s.counts[cand * self.core.ay + y] as f64 + 0.5;
            if u < acc {
                x = cand;
                break;
            }
        }
        let q = (s.counts[x * self.core.ay + y] as f64 + 0.5) / denom;
        (x, self.core.ln_px[x] - q.ln())
    }
    fn log_regret(&self, ys: &[usize]) -> f64 {
        let mut cols = vec![0u64; self.core.ay];
        for &y in ys {
            cols[y] += 1;
        }
        cols.iter().map(|&m| kt_regret(self.core.ax, m)).sum()
    }
    fn control_symbol(&self, accept: bool) -> usize {
        if accept {
            self.core.x_accept
        } else {
            self.core.x_reject
        }
    }
    fn ht_llr(&self, y: usize) -> f64 {
        self.core.llr[y]
    }
}

/// Binary-input binary-output channel decoded by `n (ln 2 - h(flip rate))`.
/// Requires a uniform input distribution.
#[derive(Debug, Clone)]
pub(crate) struct UniversalBsc {
    core: DmcCore,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct FlipState {
    n: u32,
    flips: u32,
}

impl UniversalBsc {
    pub(crate) fn new(dmc: &Dmc, estimate: &[Vec<f64>], x_accept: usize, x_reject: usize) -> Self {
        Self { core: DmcCore::new(dmc, &InputDist::uniform(2), estimate, x_accept, x_reject) }
    }
}

impl Link for UniversalBsc {
    type In = usize;
    type Out = usize;
    type State = FlipState;

    fn draw_input<R: Rng>(&self, rng: &mut R) -> usize {
        usize::from(rng.random::<bool>())
    }
    fn channel<R: Rng>(&self, x: usize, rng: &mut R) -> usize {
        pick(&self.core.row_cdf[x], rng)
    }
    fn fresh(&self) -> FlipState {
        FlipState { n: 0, flips: 0 }
    }
    fn advance(&self, s: &mut FlipState, x: usize, y: usize) -> f64 {
        s.n += 1;
        s.flips += u32::from(x != y);
        let n = s.n as f64;
        let k = s.flips as f64;
        let xl = |v: f64| if v > 0.0 { v * v.ln() } else { 0.0 };
        (n * std::f64::consts::LN_2 - n * n.ln() + xl(k) + xl(n - k)).max(0.0)
    }
    fn propose<R: Rng>(&self, s: &FlipState, y: usize, rng: &mut R) -> (usize, f64) {
        let p1 = (s.flips as f64 + 0.5) / (s.n as f64 + 1.0);
        let flip = rng.random::<f64>() < p1;
        let q = if flip { p1 } else { 1.0 - p1 };
        (y ^ usize::from(flip), -std::f64::consts::LN_2 - q.ln())
    }
    fn log_regret(&self, ys: &[usize]) -> f64 {
        kt_regret(2, ys.len() as u64)
    }
    fn control_symbol(&self, accept: bool) -> usize {
        if accept {
            self.core.x_accept
        } else {
            self.core.x_reject
        }
    }
    fn ht_llr(&self, y: usize) -> f64 {
        self.core.llr[y]
    }
}

/// Gaussian channel with i.i.d. `N(0, P)` codewords and the
/// information-density metric.
#[derive(Debug, Clone)]
pub(crate) struct KnownAwgn {
    chan: GaussianChannel,
    amp: f64,
    noise_sd: f64,
    post_gain: f64,
    post_sd: f64,
}

impl KnownAwgn {
    pub(crate) fn new(chan: GaussianChannel) -> Self {
        let (p, s2) = (chan.power, chan.noise_var);
        Self {
            chan,
            amp: p.sqrt(),
            noise_sd: s2.sqrt(),
            post_gain: p / (p + s2),
            post_sd: (p * s2 / (p + s2)).sqrt(),
        }
    }
}

impl Link for KnownAwgn {
    type In = f64;
    type Out = f64;
    type State = f64;

    fn draw_input<R: Rng>(&self, rng: &mut R) -> f64 {
        self.amp * rng.sample::<f64, _>(StandardNormal)
    }
    fn channel<R: Rng>(&self, x: f64, rng: &mut R) -> f64 {
        x + self.noise_sd * rng.sample::<f64, _>(StandardNormal)
    }
    fn energy(&self, x: f64) -> f64 {
        x * x
    }
    fn fresh(&self) -> f64 {
        0.0
    }
    fn advance(&self, s: &mut f64, x: f64, y: f64) -> f64 {
        *s += gaussian_information_density(&self.chan, x, y);
        *s
    }
    fn propose<R: Rng>(&self, _s: &f64, y: f64, rng: &mut R) -> (f64, f64) {
        let x = self.post_gain * y + self.post_sd * rng.sample::<f64, _>(StandardNormal);
        (x, -gaussian_information_density(&self.chan, x, y))
    }
    fn control_symbol(&self, accept: bool) -> f64 {
        if accept {
            self.amp
        } else {
            -self.amp
        }
    }
    fn ht_llr(&self, y: f64) -> f64 {
        2.0 * self.amp * y / self.chan.noise_var
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SumState {
    n: f64,
    sxy: f64,
    sxx: f64,
    syy: f64,
}

/// Gaussian channel with the correlation metric `-(n/2) ln(1 - rho^2)` and
/// a control phase built from the estimated noise variance. Explicit
/// codebooks only.
#[derive(Debug, Clone)]
pub(crate) struct UniversalAwgn {
    amp: f64,
    noise_sd: f64,
    noise_var_est: f64,
}

impl UniversalAwgn {
    pub(crate) fn new(chan: GaussianChannel, noise_var_est: f64) -> Self {
        Self { amp: chan.power.sqrt(), noise_sd: chan.noise_var.sqrt(), noise_var_est }
    }
}

impl Link for UniversalAwgn {
    type In = f64;
    type Out = f64;
    type State = SumState;

    fn draw_input<R: Rng>(&self, rng: &mut R) -> f64 {
        self.amp * rng.sample::<f64, _>(StandardNormal)
    }
    fn channel<R: Rng>(&self, x: f64, rng: &mut R) -> f64 {
        x + self.noise_sd * rng.sample::<f64, _>(StandardNormal)
    }
    fn energy(&self, x: f64) -> f64 {
        x * x
    }
    fn fresh(&self) -> SumState {
        SumState { n: 0.0, sxy: 0.0, sxx: 0.0, syy: 0.0 }
    }
    fn advance(&self, s: &mut SumState, x: f64, y: f64) -> f64 {
        s.n += 1.0;
        s.sxy += x * y;
        s.sxx += x * x;
        s.syy += y * y;
        universal_gaussian_metric_from_sums(s.n, s.sxy, s.sxx, s.syy)
    }
    fn can_sample(&self) -> bool {
        false
    }
    fn propose<R: Rng>(&self, _s: &SumState, _y: f64, _rng: &mut R) -> (f64, f64) {
        unreachable!("the correlation metric has no sampled codebook route")
    }
    fn control_symbol(&self, accept: bool) -> f64 {
        if accept {
            self.amp
        } else {
            -self.amp
        }
    }
    fn ht_llr(&self, y: f64) -> f64 {
        2.0 * self.amp * y / self.noise_var_est
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::n_times_mi;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Worst-case KT regret by enumerating every composition.
    fn brute_regret(a: usize, m: u64) -> f64 {
        fn rec(a: usize, left: u64, acc: &mut Vec<u64>, best: &mut f64) {
            if acc.len() == a - 1 {
                acc.push(left);
                let m: u64 = acc.iter().sum();
                let ml: f64 = acc.iter().map(|&k| if k > 0 { k as f64 * (k as f64 / m as f64).ln() } else { 0.0 }).sum();
                // KT probability of one sequence with these counts, by the
                // sequential product.
                let mut seen = vec![0u64; a];
                let mut lq = 0.0;
                for (sym, &k) in acc.iter().enumerate() {
                    for _ in 0..k {
                        let n: u64 = seen.iter().sum();
                        lq += ((seen[sym] as f64 + 0.5) / (n as f64 + a as f64 / 2.0)).ln();
                        seen[sym] += 1;
                    }
                }
                *best = best.max(ml - lq);
                acc.pop();
                return;
            }
            for k in 0..=left {
                acc.push(k);
                rec(a, left - k, acc, best);
                acc.pop();
            }
        }
        let mut best = f64::NEG_INFINITY;
        rec(a, m, &mut Vec::new(), &mut best);
        best
    }

    #[test]
    fn kt_regret_matches_enumeration() {
        for a in 2..=4 {
            for m in 0..=30 {
                let b = brute_regret(a, m);
                assert!((kt_regret(a, m) - b).abs() < 1e-10, "a={a} m={m}: {} vs {b}", kt_regret(a, m));
            }
        }
    }

    #[test]
    fn incremental_type_metric_matches_direct() {
        let dmc = Dmc::new(vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.2, 0.7]]).unwrap();
        let link = UniversalDmc::new(&dmc, &InputDist::uniform(2), &dmc.rows(), 0, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = link.fresh();
        let mut counts = vec![0u64; 6];
        for _ in 0..500 {
            let x = link.draw_input(&mut rng);
            let y = link.channel(x, &mut rng);
            let m = link.advance(&mut s, x, y);
            counts[x * 3 + y] += 1;
            let rows: Vec<u64> = (0..2).map(|i| counts[i * 3..i * 3 + 3].iter().sum()).collect();
            let cols: Vec<u64> = (0..3).map(|j| counts[j] + counts[3 + j]).collect();
            let direct = n_times_mi(&counts, &rows, &cols, 3);
            assert!((m - direct).abs() < 1e-9 * direct.max(1.0), "{m} {direct}");
        }
    }

    #[test]
    fn flip_metric_matches_empirical_mi_for_bsc() {
        // With a uniform input the flip metric and the empirical MI differ,
        // but both vanish on a half-flipped sequence and agree on n ln 2 at
        // zero flips.
        let dmc = Dmc::bsc(0.11).unwrap();
        let link = UniversalBsc::new(&dmc, &dmc.rows(), 0, 1);
        let mut s = link.fresh();
        let mut last = 0.0;
        for _ in 0..10 {
            last = link.advance(&mut s, 1, 1);
        }
        assert!((last - 10.0 * std::f64::consts::LN_2).abs() < 1e-12);
        let mut s = link.fresh();
        for i in 0..10 {
            last = link.advance(&mut s, i % 2, 0);
        }
        assert!(last.abs() < 1e-12);
    }

    /// The proposal log-ratio never exceeds `log_regret - metric`.
    #[test]
    fn proposal_ratio_is_dominated() {
        let dmc = Dmc::new(vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.2, 0.6], vec![0.3, 0.4, 0.3]]).unwrap();
        let px = InputDist::new(vec![0.5, 0.3, 0.2]).unwrap();
        let link = UniversalDmc::new(&dmc, &px, &dmc.rows(), 0, 1);
        let bsc = UniversalBsc::new(&Dmc::bsc(0.2).unwrap(), &Dmc::bsc(0.2).unwrap().rows(), 0, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let ys: Vec<usize> = (0..60).map(|_| rng.random_range(0..3)).collect();
            let (mut s, mut l) = (link.fresh(), 0.0);
            for (i, &y) in ys.iter().enumerate() {
                let (x, dl) = link.propose(&s, y, &mut rng);
                l += dl;
                let m = link.advance(&mut s, x, y);
                assert!(l + m <= link.log_regret(&ys[..=i]) + 1e-9);
            }
            let (mut s, mut l) = (bsc.fresh(), 0.0);
            for (i, &y) in ys.iter().enumerate() {
                let y = y % 2;
                let (x, dl) = bsc.propose(&s, y, &mut rng);
                l += dl;
                let m = bsc.advance(&mut s, x, y);
                assert!(l + m <= bsc.log_regret(&ys[..=i]) + 1e-9);
            }
        }
    }

    #[test]
    fn known_proposals_are_exact_likelihood_ratios() {
        let dmc = Dmc::bsc(0.11).unwrap();
        let link = KnownDmc::new(&dmc, &InputDist::uniform(2), 0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = 0.0;
        for _ in 0..50 {
            let y = rng.random_range(0..2);
            let (x, dl) = link.propose(&s, y, &mut rng);
            link.advance(&mut s, x, y);
            assert!((dl + link.idens[x * 2 + y]).abs() < 1e-15);
        }
        let g = KnownAwgn::new(GaussianChannel::from_snr(1.0).unwrap());
        assert_eq!(g.ht_llr(0.5), 1.0);
        assert_eq!(g.control_symbol(false), -1.0);
    }
}
