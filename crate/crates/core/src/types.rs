//! Joint types, empirical mutual information and the universal metrics used
//! by decoders that do not know the channel.

use serde::Serialize;
use thiserror::Error;

use crate::numeric::xlogx;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TypeError {
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty sequence")]
    EmptySequence,
    #[error("symbol {symbol} at position {pos} outside alphabet of size {size}")]
    SymbolOutOfRange { pos: usize, symbol: usize, size: usize },
    #[error("sequence has zero energy")]
    DegenerateSequence,
    #[error("alphabet sizes must be at least 2, got ({0}, {1})")]
    AlphabetTooSmall(usize, usize),
    #[error("n * Q({index}) = {value} is not an integer")]
    NonIntegerType { index: usize, value: f64 },
    #[error("count table has {found} cells, expected {expected}")]
    ShapeMismatch { expected: usize, found: usize },
}

/// Joint type of a pair of sequences: counts `N(x, y)` stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JointType {
    ax: usize,
    ay: usize,
    counts: Vec<u64>,
    n: u64,
}

impl JointType {
    pub fn from_counts(ax: usize, ay: usize, counts: Vec<u64>) -> Result<Self, TypeError> {
        if counts.len() != ax * ay {
            return Err(TypeError::ShapeMismatch { expected: ax * ay, found: counts.len() });
        }
        let n = counts.iter().sum();
        if n == 0 {
            return Err(TypeError::EmptySequence);
        }
        Ok(Self { ax, ay, counts, n })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn count(&self, x: usize, y: usize) -> u64 {
        self.counts[x * self.ay + y]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.ax, self.ay)
    }

    /// Counts as a nested `[x][y]` table.
    pub fn table(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.ay).map(|c| c.to_vec()).collect()
    }
}

/// Joint type of `(xn, yn)` over alphabets of sizes `ax` and `ay`.
pub fn joint_type(xn: &[usize], yn: &[usize], ax: usize, ay: usize) -> Result<JointType, TypeError> {
    if xn.len() != yn.len() {
        return Err(TypeError::LengthMismatch(xn.len(), yn.len()));
    }
    if xn.is_empty() {
        return Err(TypeError::EmptySequence);
    }
    let mut counts = vec![0u64; ax * ay];
    for (pos, (&x, &y)) in xn.iter().zip(yn).enumerate() {
        if x >= ax {
            return Err(TypeError::SymbolOutOfRange { pos, symbol: x, size: ax });
        }
        if y >= ay {
            return Err(TypeError::SymbolOutOfRange { pos, symbol: y, size: ay });
        }
        counts[x * ay + y] += 1;
    }
    Ok(JointType { ax, ay, counts, n: xn.len() as u64 })
}

/// Mutual information of the joint type, in nats.
pub fn empirical_mi(t: &JointType) -> f64 {
    let n = t.n as f64;
    let mut rows = vec![0u64; t.ax];
    let mut cols = vec![0u64; t.ay];
    for x in 0..t.ax {
        for y in 0..t.ay {
            let c = t.count(x, y);
            rows[x] += c;
            cols[y] += c;
        }
    }
    n_times_mi(&t.counts, &rows, &cols, t.ay) / n
}

/// `n * I(joint type)` from counts and marginals. Used by the decoders,
/// which track counts incrementally.
pub fn n_times_mi(counts: &[u64], rows: &[u64], cols: &[u64], ay: usize) -> f64 {
    let n: u64 = rows.iter().sum();
    if n == 0 {
        return 0.0;
    }
    // n I = sum c ln c + n ln n - sum r ln r - sum k ln k
    let joint: f64 = counts.iter().map(|&c| xlogx(c as f64)).sum();
    let rx: f64 = rows.iter().map(|&c| xlogx(c as f64)).sum();
    let cy: f64 = cols.iter().map(|&c| xlogx(c as f64)).sum();
    debug_assert_eq!(counts.len(), rows.len() * ay);
    (joint + xlogx(n as f64) - rx - cy).max(0.0)
}

/// Uncentered sample correlation `<x, y> / (|x| |y|)`.
pub fn empirical_correlation(xn: &[f64], yn: &[f64]) -> Result<f64, TypeError> {
    if xn.len() != yn.len() {
        return Err(TypeError::LengthMismatch(xn.len(), yn.len()));
    }
    if xn.is_empty() {
        return Err(TypeError::EmptySequence);
    }
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xn.iter().zip(yn) {
        sxy += x * y;
        sxx += x * x;
        syy += y * y;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(TypeError::DegenerateSequence);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// `-(n/2) ln(1 - rho^2)`. Returns `f64::INFINITY` when `|rho| = 1` up to
/// rounding.
pub fn universal_gaussian_metric(xn: &[f64], yn: &[f64]) -> Result<f64, TypeError> {
    let rho = empirical_correlation(xn, yn)?;
    Ok(metric_from_correlation(xn.len() as f64, rho))
}

/// Same metric from running sums; zero-energy inputs score zero.
pub fn universal_gaussian_metric_from_sums(n: f64, sxy: f64, sxx: f64, syy: f64) -> f64 {
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    metric_from_correlation(n, rho)
}

fn metric_from_correlation(n: f64, rho: f64) -> f64 {
    let one_minus = 1.0 - rho * rho;
    if one_minus <= 8.0 * f64::EPSILON {
        f64::INFINITY
    } else {
        -0.5 * n * one_minus.ln()
    }
}

/// Exponents of the polynomial prefactor in the empirical-MI tail bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailExponent {
    pub k: f64,
    pub d: f64,
}

/// `d = min{|X||Y|/2, (|X| - 3/2)(|Y| - 3/2) + 3/4}` and `k = d - 1`.
pub fn tail_exponents(ax: usize, ay: usize) -> Result<TailExponent, TypeError> {
    if ax < 2 || ay < 2 {
        return Err(TypeError::AlphabetTooSmall(ax, ay));
    }
    let (a, b) = (ax as f64, ay as f64);
    let d = (a * b / 2.0).min((a - 1.5) * (b - 1.5) + 0.75);
    Ok(TailExponent { k: d - 1.0, d })
}

/// Constants of the refined type-counting tail bound for empirical MI.
pub const TAIL_C0: f64 = 3.1967;
pub const TAIL_C1: f64 = 2.9290;

/// `P[n I(joint type) >= gamma] <= C1 * sum_{i=1}^{|X||Y|-2} ((C0 n / i)^{i/2} + 1) e^{-gamma}`
/// under independent inputs and outputs.
pub fn refined_mi_tail_bound(n: u64, ax: usize, ay: usize, gamma: f64) -> f64 {
    let terms = (ax * ay).saturating_sub(2);
    let s: f64 = (1..=terms)
        .map(|i| (TAIL_C0 * n as f64 / i as f64).powf(i as f64 / 2.0) + 1.0)
        .sum();
    TAIL_C1 * s * (-gamma).exp()
}

/// Method-of-types bound `(n + 1)^{|X||Y| - 1} e^{-gamma}`.
pub fn polynomial_mi_tail_bound(n: u64, ax: usize, ay: usize, gamma: f64) -> f64 {
    (((ax * ay) as f64 - 1.0) * ((n + 1) as f64).ln() - gamma).exp()
}

/// Upper bound on `ln |T_n(Q)|`:
/// `n H(Q) - ((|X| - 1)/2) ln(2 pi n) - (1/2) sum ln Q~(x)`, where
/// `Q~(x) = Q(x)` if positive and `1/(2 pi n)` otherwise.
pub fn type_class_log_size_bound(q: &[f64], n: u64) -> Result<f64, TypeError> {
    if q.is_empty() || n == 0 {
        return Err(TypeError::EmptySequence);
    }
    let nf = n as f64;
    for (index, &qx) in q.iter().enumerate() {
        let value = nf * qx;
        if (value - value.round()).abs() > 1e-9 || value < -1e-9 {
            return Err(TypeError::NonIntegerType { index, value });
        }
    }
    let two_pi_n = 2.0 * std::f64::consts::PI * nf;
    let h: f64 = -q.iter().map(|&x| xlogx(x)).sum::<f64>();
    let tilde: f64 = q.iter().map(|&x| if x > 0.0 { x.ln() } else { -two_pi_n.ln() }).sum();
    Ok(nf * h - 0.5 * (q.len() as f64 - 1.0) * two_pi_n.ln() - 0.5 * tilde)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ln_multinomial;
    use proptest::prelude::*;

    #[test]
    fn joint_type_examples() {
        assert_eq!(joint_type(&[0, 1], &[0, 1], 2, 2).unwrap().table(), vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(joint_type(&[0, 0, 0], &[1, 1, 1], 2, 2).unwrap().table(), vec![vec![0, 3], vec![0, 0]]);
        assert_eq!(joint_type(&[0], &[0, 1], 2, 2), Err(TypeError::LengthMismatch(1, 2)));
        assert_eq!(joint_type(&[], &[], 2, 2), Err(TypeError::EmptySequence));
        assert!(matches!(joint_type(&[2], &[0], 2, 2), Err(TypeError::SymbolOutOfRange { .. })));
    }

    #[test]
    fn empirical_mi_examples() {
        let diag = JointType::from_counts(2, 2, vec![5, 0, 0, 5]).unwrap();
        assert!((empirical_mi(&diag) - 2f64.ln()).abs() < 1e-12);
        let flat = JointType::from_counts(2, 2, vec![1, 1, 1, 1]).unwrap();
        assert_eq!(empirical_mi(&flat), 0.0);
        // By hand: (2/3) ln(4/3) + (1/3) ln(2/3).
        let t = JointType::from_counts(2, 2, vec![2, 1, 1, 2]).unwrap();
        let hand = (2.0 / 3.0) * (4f64 / 3.0).ln() + (1.0 / 3.0) * (2f64 / 3.0).ln();
        assert!((empirical_mi(&t) - hand).abs() < 1e-15);
        assert!((empirical_mi(&t) - 0.056633).abs() < 1e-6);
    }

    #[test]
    fn correlation_examples() {
        assert_eq!(empirical_correlation(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), 1.0);
        assert!((empirical_correlation(&[1.0, 2.0], &[2.0, 1.0]).unwrap() - 0.8).abs() < 1e-12);
        assert_eq!(empirical_correlation(&[0.0, 0.0], &[1.0, 2.0]), Err(TypeError::DegenerateSequence));
    }

    #[test]
    fn universal_gaussian_metric_examples() {
        let v = universal_gaussian_metric(&[1.0, 2.0], &[2.0, 1.0]).unwrap();
        assert!((v - 1.02165).abs() < 1e-5, "{v}");
        assert_eq!(universal_gaussian_metric(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn tail_exponent_examples() {
        assert_eq!(tail_exponents(2, 2).unwrap(), TailExponent { k: 0.0, d: 1.0 });
        assert_eq!(tail_exponents(2, 3).unwrap(), TailExponent { k: 0.5, d: 1.5 });
        assert_eq!(tail_exponents(3, 3).unwrap(), TailExponent { k: 2.0, d: 3.0 });
        assert_eq!(tail_exponents(1, 3), Err(TypeError::AlphabetTooSmall(1, 3)));
    }

    #[test]
    fn mi_zero_iff_type_factorizes_exhaustive() {
        for n in 1..=6u32 {
            for xb in 0..(1u32 << n) {
                for yb in 0..(1u32 << n) {
                    let xs: Vec<usize> = (0..n).map(|i| ((xb >> i) & 1) as usize).collect();
                    let ys: Vec<usize> = (0..n).map(|i| ((yb >> i) & 1) as usize).collect();
                    let t = joint_type(&xs, &ys, 2, 2).unwrap();
                    let rows = [t.count(0, 0) + t.count(0, 1), t.count(1, 0) + t.count(1, 1)];
                    let cols = [t.count(0, 0) + t.count(1, 0), t.count(0, 1) + t.count(1, 1)];
                    let factorizes = (0..2).all(|x| (0..2).all(|y| t.count(x, y) * n as u64 == rows[x] * cols[y]));
                    let mi = empirical_mi(&t);
                    assert_eq!(mi.abs() < 1e-12, factorizes, "{xs:?} {ys:?} {mi}");
                }
            }
        }
    }

    #[test]
    fn type_class_bound_dominates_exact_size() {
        for n in 1..=60u64 {
            for k in 0..=n {
                let q = [k as f64 / n as f64, (n - k) as f64 / n as f64];
                let bound = type_class_log_size_bound(&q, n).unwrap();
                let exact = ln_multinomial(&[k, n - k]);
                assert!(bound >= exact - 1e-9, "n={n} k={k}: {bound} < {exact}");
            }
        }
        for n in [3u64, 6, 9, 12] {
            for a in 0..=n {
                for b in 0..=(n - a) {
                    let c = n - a - b;
                    let q = [a, b, c].map(|v| v as f64 / n as f64);
                    let bound = type_class_log_size_bound(&q, n).unwrap();
                    assert!(bound >= ln_multinomial(&[a, b, c]) - 1e-9);
                }
            }
        }
        assert!(matches!(type_class_log_size_bound(&[0.3, 0.7], 5), Err(TypeError::NonIntegerType { .. })));
    }

    proptest! {
        #[test]
        fn mi_invariant_under_joint_permutation(pairs in prop::collection::vec((0usize..3, 0usize..2), 1..40), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let (x1, y1): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let (x2, y2): (Vec<usize>, Vec<usize>) = shuffled.into_iter().unzip();
            let a = empirical_mi(&joint_type(&x1, &y1, 3, 2).unwrap());
            let b = empirical_mi(&joint_type(&x2, &y2, 3, 2).unwrap());
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a >= 0.0 && a <= 2f64.ln() + 1e-12);
        }

        #[test]
        fn correlation_bounded_and_scale_free(v in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..30), s in 0.1f64..10.0) {
            let (x, y): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            if let Ok(r) = empirical_correlation(&x, &y) {
                prop_assert!((-1.0..=1.0).contains(&r));
                let xs: Vec<f64> = x.iter().map(|a| a * s).collect();
                let r2 = empirical_correlation(&xs, &y).unwrap();
                prop_assert!((r - r2).abs() < 1e-9);
            }
        }
    }
}
