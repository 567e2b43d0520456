//! Nonparametric comparison of algorithms.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest sample handled by exact enumeration in the signed-rank test.
pub const WILCOXON_EXACT_MAX: usize = 20;
/// Fewer non-zero differences than this never yield a significant verdict.
pub const WILCOXON_MIN_N: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub chi2: f64,
    pub df: usize,
    pub p_value: f64,
    /// Mean within-block rank per treatment; rank 1 is the highest score.
    pub average_ranks: Vec<f64>,
}

impl FriedmanResult {
    pub fn critical_value(&self, alpha: f64) -> f64 {
        chi2_critical(alpha, self.df as f64)
    }

    pub fn rejects(&self, alpha: f64) -> bool {
        self.chi2 > self.critical_value(alpha)
    }
}

/// Ranks of `values` in descending order (largest gets 1), ties averaged.
pub fn descending_ranks(values: &[f64]) -> Vec<f64> {
    let negated: Vec<f64> = values.iter().map(|v| -v).collect();
    ascending_ranks(&negated)
}

/// Ranks in ascending order (smallest gets 1), ties averaged.
pub fn ascending_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Friedman test over a blocks × treatments matrix of scores.
pub fn friedman(scores: &[Vec<f64>]) -> Result<FriedmanResult> {
    let n = scores.len();
    if n == 0 {
        return Err(Error::invalid("Friedman test needs at least one block"));
    }
    let k = scores[0].len();
    if k < 2 {
        return Err(Error::invalid("Friedman test needs at least two treatments"));
    }
    if scores.iter().any(|row| row.len() != k) {
        return Err(Error::Shape("score matrix is not rectangular".into()));
    }
    if scores.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("score matrix holds a non-finite value"));
    }
    let mut sums = vec![0.0; k];
    for row in scores {
        for (s, r) in sums.iter_mut().zip(descending_ranks(row)) {
            *s += r;
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    let average_ranks: Vec<f64> = sums.iter().map(|s| s / nf).collect();
    let sq: f64 = average_ranks.iter().map(|r| r * r).sum();
    let chi2 = (12.0 * nf / (kf * (kf + 1.0)) * sq - 3.0 * nf * (kf + 1.0)).max(0.0);
    let df = k - 1;
    Ok(FriedmanResult { chi2, df, p_value: chi2_upper_tail(chi2, df as f64), average_ranks })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Superior,
    Inferior,
    Equivalent,
}

impl Verdict {
    pub fn flip(self) -> Verdict {
        match self {
            Verdict::Superior => Verdict::Inferior,
            Verdict::Inferior => Verdict::Superior,
            Verdict::Equivalent => Verdict::Equivalent,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Verdict::Superior => "+",
            Verdict::Inferior => "-",
            Verdict::Equivalent => "=",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Non-zero differences used.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub p_value: f64,
    pub exact: bool,
    pub verdict: Verdict,
}

/// Two-sided signed-rank test of `a` against `b`. `Superior` means `a`
/// scores significantly higher.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], alpha: f64) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("paired samples of length {} and {}", a.len(), b.len())));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|&v| v != 0.0).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite paired difference"));
    }
    let n = d.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            n,
            w_plus: 0.0,
            w_minus: 0.0,
            statistic: 0.0,
            p_value: 1.0,
            exact: true,
            verdict: Verdict::Equivalent,
        });
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = ascending_ranks(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let w_minus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v < 0.0).map(|(_, r)| r).sum();
    let exact = n <= WILCOXON_EXACT_MAX;
    let p_value = if exact { exact_p(&ranks, w_plus) } else { normal_p(&abs, &ranks, w_plus) };

    let verdict = if n < WILCOXON_MIN_N || p_value >= alpha {
        Verdict::Equivalent
    } else {
        let m = median(&d);
        let direction = if m != 0.0 { m } else { w_plus - w_minus };
        if direction > 0.0 {
            Verdict::Superior
        } else if direction < 0.0 {
            Verdict::Inferior
        } else {
            Verdict::Equivalent
        }
    };
    Ok(WilcoxonResult { n, w_plus, w_minus, statistic: w_plus.min(w_minus), p_value, exact, verdict })
}

/// Exact two-sided p-value: the null distribution of W+ is built by dynamic
/// programming over doubled ranks, which are integers even with ties.
fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0f64; total + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let t = (2.0 * w_plus).round() as usize;
    let all = 2f64.powi(ranks.len() as i32);
    let lower: f64 = counts[..=t].iter().sum::<f64>() / all;
    let upper: f64 = counts[t..].iter().sum::<f64>() / all;
    (2.0 * lower.min(upper)).min(1.0)
}

fn normal_p(abs: &[f64], ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    // Tie correction: each group of t equal magnitudes removes (t³ - t)/48.
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        var -= (t * t * t - t) / 48.0;
        i = j + 1;
    }
    if var <= 0.0 {
        return 1.0;
    }
    let z = (w_plus - mean) / var.sqrt();
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Pairwise verdicts between treatments (columns of `samples`), built from
/// the upper triangle so that `m[i][j]` and `m[j][i]` always mirror.
pub fn wilcoxon_matrix(samples: &[Vec<f64>], alpha: f64) -> Result<Vec<Vec<Verdict>>> {
    let k = samples.len();
    let mut m = vec![vec![Verdict::Equivalent; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let v = wilcoxon_signed_rank(&samples[i], &samples[j], alpha)?.verdict;
            m[i][j] = v;
            m[j][i] = v.flip();
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinTieLoss {
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
}

/// Row-wise counts of a square verdict matrix, diagonal ignored.
pub fn win_tie_loss(matrix: &[Vec<Verdict>]) -> Result<Vec<WinTieLoss>> {
    let k = matrix.len();
    if matrix.iter().any(|row| row.len() != k) {
        return Err(Error::Shape("verdict matrix is not square".into()));
    }
    Ok(matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut c = WinTieLoss { wins: 0, ties: 0, losses: 0 };
            for (j, v) in row.iter().enumerate() {
                if i == j {
                    continue;
                }
                match v {
                    Verdict::Superior => c.wins += 1,
                    Verdict::Equivalent => c.ties += 1,
                    Verdict::Inferior => c.losses += 1,
                }
            }
            c
        })
        .collect())
}

/// Population standard deviation of one treatment's per-condition scores.
pub fn stability(scores: &[f64]) -> Result<f64> {
    if scores.len() < 2 {
        return Err(Error::invalid("stability needs scores for at least two conditions"));
    }
    Ok(population_std(scores))
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn population_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

// Chi-square tail via the regularized incomplete gamma function.

/// `P(X > x)` for a chi-square variable with `df` degrees of freedom.
pub fn chi2_upper_tail(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(df / 2.0, x / 2.0)
}

/// Value exceeded with probability `alpha`.
pub fn chi2_critical(alpha: f64, df: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, df.max(1.0));
    while chi2_upper_tail(hi, df) > alpha {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_upper_tail(mid, df) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        2.0 - erfc(-x)
    } else {
        gamma_q(0.5, x * x)
    }
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7, n = 9.
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut sum = 1.0 / a;
    let mut term = sum;
    let mut ap = a;
    for _ in 0..10_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_fraction(a: f64, x: f64) -> f64 {
    // Modified Lentz evaluation of the continued fraction.
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn friedman_examples() {
        let ties = vec![vec![5.0; 4]; 3];
        let r = friedman(&ties).unwrap();
        assert_eq!(r.chi2, 0.0);
        assert!(r.average_ranks.iter().all(|&x| x == 2.5));

        let ordered = vec![vec![9.0, 5.0, 1.0], vec![0.9, 0.5, 0.1], vec![3.0, 2.0, 1.0], vec![80.0, 70.0, 60.0]];
        let r = friedman(&ordered).unwrap();
        assert!((r.chi2 - 8.0).abs() < 1e-12);
        assert_eq!(r.average_ranks, vec![1.0, 2.0, 3.0]);
        assert_eq!(r.df, 2);

        assert!(friedman(&[vec![1.0]]).is_err());
        assert!(friedman(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn chi_square_decision_rule() {
        let crit = chi2_critical(0.05, 12.0);
        assert!((crit - 21.03).abs() < 5e-3, "{crit}");
        let fr = FriedmanResult { chi2: 61.48, df: 12, p_value: chi2_upper_tail(61.48, 12.0), average_ranks: vec![] };
        assert!(fr.rejects(0.05));
        assert!((fr.p_value - 1.2086e-8).abs() < 0.01e-8, "{}", fr.p_value);
        let fr = FriedmanResult { chi2: 21.0, ..fr };
        assert!(!fr.rejects(0.05));
    }

    #[test]
    fn chi_square_tail_known_values() {
        // df = 2 has the closed form exp(-x/2).
        for x in [0.1, 1.0, 5.0, 30.0] {
            assert!((chi2_upper_tail(x, 2.0) - (-x / 2.0f64).exp()).abs() < 1e-13);
        }
        // df = 1: P(|Z| > z) with z = 1.959963984540054 is 0.05.
        let z: f64 = 1.959_963_984_540_054;
        assert!((chi2_upper_tail(z * z, 1.0) - 0.05).abs() < 1e-12);
        assert!((erfc(0.0) - 1.0).abs() < 1e-15);
        assert!((erfc(1.0) - 0.157_299_207_050_285_13).abs() < 1e-13);
    }

    #[test]
    fn wilcoxon_examples() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = wilcoxon_signed_rank(&a, &a, 0.05).unwrap();
        assert_eq!(r.verdict, Verdict::Equivalent);
        assert_eq!(r.n, 0);

        let d = [1.0, 2.0, 3.0, 4.0, 5.0, -6.0];
        let zeros = [0.0; 6];
        let r = wilcoxon_signed_rank(&d, &zeros, 0.05).unwrap();
        assert_eq!((r.w_plus, r.w_minus, r.statistic), (15.0, 6.0, 6.0));
        assert!((r.p_value - brute_force_p(&d)).abs() < 1e-12);

        let pos: Vec<f64> = (1..=10).map(|i| i as f64 * 0.3).collect();
        let r = wilcoxon_signed_rank(&pos, &[0.0; 10], 0.05).unwrap();
        assert!((r.p_value - 2.0 / 1024.0).abs() < 1e-15);
        assert_eq!(r.verdict, Verdict::Superior);
        let r = wilcoxon_signed_rank(&[0.0; 10], &pos, 0.05).unwrap();
        assert_eq!(r.verdict, Verdict::Inferior);

        // Too few non-zero differences: never significant.
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0], &[0.0; 4], 0.5).unwrap();
        assert_eq!(r.verdict, Verdict::Equivalent);
        assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0], 0.05).is_err());
    }

    /// Two-sided p by enumerating all 2ⁿ sign patterns over the tie-averaged
    /// ranks of |d|, counted independently of the DP.
    fn brute_force_p(d: &[f64]) -> f64 {
        let nz: Vec<f64> = d.iter().copied().filter(|&v| v != 0.0).collect();
        let n = nz.len();
        let abs: Vec<f64> = nz.iter().map(|v| v.abs()).collect();
        let ranks: Vec<f64> = abs
            .iter()
            .map(|&v| {
                let less = abs.iter().filter(|&&u| u < v).count() as f64;
                let equal = abs.iter().filter(|&&u| u == v).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect();
        let observed: f64 = nz.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
        let (mut le, mut ge) = (0u64, 0u64);
        for mask in 0u64..(1 << n) {
            let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if w <= observed + 1e-9 {
                le += 1;
            }
            if w >= observed - 1e-9 {
                ge += 1;
            }
        }
        let total = (1u64 << n) as f64;
        (2.0 * (le.min(ge) as f64) / total).min(1.0)
    }

    #[test]
    fn exact_p_matches_enumeration_up_to_twelve() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for n in 1..=12 {
            for trial in 0..25 {
                // Integer-valued scores make ties and zeros common.
                let a: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
                let b: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
                let r = wilcoxon_signed_rank(&a, &b, 0.05).unwrap();
                let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                assert!((r.p_value - brute_force_p(&d)).abs() < 1e-12, "n {n} trial {trial}");
            }
        }
    }

    #[test]
    fn normal_approximation_close_to_exact_at_twenty() {
        let d: Vec<f64> = (1..=20).map(|i| if i % 3 == 0 { -(i as f64) } else { i as f64 }).collect();
        let abs: Vec<f64> = d.iter().map(|v: &f64| v.abs()).collect();
        let ranks = ascending_ranks(&abs);
        let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
        let exact = exact_p(&ranks, w_plus);
        let approx = normal_p(&abs, &ranks, w_plus);
        assert!((exact - approx).abs() < 0.01, "{exact} vs {approx}");
        let long: Vec<f64> = (1..=30).map(|i| i as f64).collect();
        let r = wilcoxon_signed_rank(&long, &[0.0; 30], 0.05).unwrap();
        assert!(!r.exact);
        assert_eq!(r.verdict, Verdict::Superior);
    }

    #[test]
    fn win_tie_loss_examples() {
        let eq = vec![vec![Verdict::Equivalent; 13]; 13];
        let counts = win_tie_loss(&eq).unwrap();
        assert!(counts.iter().all(|c| *c == WinTieLoss { wins: 0, ties: 12, losses: 0 }));

        let mut m = eq.clone();
        for j in 1..13 {
            m[0][j] = Verdict::Superior;
            m[j][0] = Verdict::Inferior;
        }
        let counts = win_tie_loss(&m).unwrap();
        assert_eq!(counts[0], WinTieLoss { wins: 12, ties: 0, losses: 0 });
        assert_eq!(counts[5], WinTieLoss { wins: 0, ties: 11, losses: 1 });
        assert!(win_tie_loss(&[vec![Verdict::Equivalent; 2]]).is_err());
    }

    #[test]
    fn stability_examples() {
        assert_eq!(stability(&[70.0, 70.0, 70.0]).unwrap(), 0.0);
        assert_eq!(stability(&[80.0, 90.0]).unwrap(), 5.0);
        let s = [87.63, 64.19, 70.19, 71.50];
        // Direct definition in the E[x²] - E[x]² form.
        let n = s.len() as f64;
        let m = s.iter().sum::<f64>() / n;
        let oracle = (s.iter().map(|x| x * x).sum::<f64>() / n - m * m).sqrt();
        assert!((stability(&s).unwrap() - oracle).abs() < 1e-9);
        assert!(stability(&[1.0]).is_err());
    }

    fn score_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..7, 1usize..6).prop_flat_map(|(k, n)| {
            proptest::collection::vec(proptest::collection::vec((0u8..5).prop_map(f64::from), k), n)
        })
    }

    proptest! {
        #[test]
        fn rank_sums_fixed(m in score_matrix()) {
            let r = friedman(&m).unwrap();
            let k = m[0].len() as f64;
            let total: f64 = r.average_ranks.iter().sum();
            prop_assert!((total - k * (k + 1.0) / 2.0).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&r.p_value));
        }

        #[test]
        fn friedman_ignores_monotone_transforms(m in score_matrix()) {
            let transformed: Vec<Vec<f64>> = m.iter().map(|row| row.iter().map(|v| (v * 0.7).exp() + 3.0).collect()).collect();
            prop_assert_eq!(friedman(&m).unwrap(), friedman(&transformed).unwrap());
        }

        #[test]
        fn matrix_is_antisymmetric(seed in any::<u64>(), k in 2usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<Vec<f64>> = (0..k)
                .map(|i| (0..8).map(|_| rng.random_range(0.0..10.0) + i as f64 * 2.0).collect())
                .collect();
            let m = wilcoxon_matrix(&samples, 0.05).unwrap();
            for i in 0..k {
                for j in 0..k {
                    prop_assert_eq!(m[i][j], m[j][i].flip());
                }
            }
            for c in win_tie_loss(&m).unwrap() {
                prop_assert_eq!(c.wins + c.ties + c.losses, k - 1);
            }
        }
    }
}
