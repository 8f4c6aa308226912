//! Confidence intervals and rank statistics for model comparison.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("invalid counts: {successes} successes out of {trials} trials")]
    InvalidCounts { successes: u64, trials: u64 },
    #[error("confidence must lie strictly between 0 and 1, got {0}")]
    InvalidConfidence(f64),
    #[error("input is empty")]
    EmptyInput,
    #[error("resample count must be at least 1")]
    NoResamples,
    #[error("shape error: {0}")]
    Shape(String),
}

/// Point estimate with a two-sided interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub point: f64,
    pub low: f64,
    pub high: f64,
    pub confidence: f64,
    /// Set when a percentile interval does not contain its point estimate.
    #[serde(default)]
    pub point_outside: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub chi2: f64,
    pub df: usize,
    pub p_value: f64,
    /// Kendall's coefficient of concordance.
    pub w: f64,
    pub n_blocks: usize,
    pub k_treatments: usize,
}

fn check_confidence(confidence: f64) -> Result<(), StatsError> {
    if confidence > 0.0 && confidence < 1.0 {
        Ok(())
    } else {
        Err(StatsError::InvalidConfidence(confidence))
    }
}

/// Inverse of the standard normal CDF (Acklam's rational approximation,
/// relative error below 1.2e-9 before refinement).
#[allow(clippy::excessive_precision)]
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Wilson score interval for a binomial proportion, without continuity
/// correction.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> Result<Interval, StatsError> {
    if trials == 0 || successes > trials {
        return Err(StatsError::InvalidCounts { successes, trials });
    }
    check_confidence(confidence)?;
    let z = normal_quantile(0.5 + confidence / 2.0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // At p = 0 or 1 one endpoint is exactly the boundary.
    let low = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    Ok(Interval { point: p, low, high, confidence, point_outside: false })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Resamples drawn per RNG stream; fixes the work split so results do not
/// depend on the thread count.
const BOOTSTRAP_SHARD: usize = 1024;

/// Sorted means of `resamples` bootstrap resamples.
pub fn bootstrap_means(values: &[f64], resamples: usize, seed: u64) -> Vec<f64> {
    let n = values.len();
    let shards = resamples.div_ceil(BOOTSTRAP_SHARD);
    let mut means: Vec<f64> = (0..shards)
        .into_par_iter()
        .flat_map_iter(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard as u64);
            let count = BOOTSTRAP_SHARD.min(resamples - shard * BOOTSTRAP_SHARD);
            (0..count)
                .map(|_| {
                    let mut sum = 0.0;
                    for _ in 0..n {
                        sum += values[rng.random_range(0..n)];
                    }
                    sum / n as f64
                })
                .collect::<Vec<_>>()
        })
        .collect();
    means.sort_by(f64::total_cmp);
    means
}

/// Percentile bootstrap interval of the mean. Endpoints are order statistics
/// of the resample means at ranks `floor(a*(B-1))` and `ceil((1-a)*(B-1))`
/// with `a = (1 - confidence) / 2`.
pub fn bootstrap_ci(values: &[f64], resamples: usize, confidence: f64, seed: u64) -> Result<Interval, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if resamples == 0 {
        return Err(StatsError::NoResamples);
    }
    check_confidence(confidence)?;
    let means = bootstrap_means(values, resamples, seed);
    let tail = (1.0 - confidence) / 2.0;
    let last = (resamples - 1) as f64;
    let lo_idx = (tail * last).floor() as usize;
    let hi_idx = ((1.0 - tail) * last).ceil() as usize;
    let point = mean(values);
    let (low, high) = (means[lo_idx], means[hi_idx.min(resamples - 1)]);
    Ok(Interval { point, low, high, confidence, point_outside: point < low || point > high })
}

/// Mid-ranks (1-based, ascending) of one block, plus the tie term
/// `sum(t^3 - t)` over tie groups.
pub fn mid_ranks(block: &[f64]) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..block.len()).collect();
    order.sort_by(|&a, &b| block[a].total_cmp(&block[b]));
    let mut ranks = vec![0.0; block.len()];
    let mut ties = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && block[order[j + 1]] == block[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        let t = (j - i + 1) as f64;
        ties += t * t * t - t;
        i = j + 1;
    }
    (ranks, ties)
}

/// Kendall's W from a Friedman statistic.
pub fn kendall_w(chi2: f64, n_blocks: usize, k_treatments: usize) -> f64 {
    let denom = n_blocks as f64 * (k_treatments as f64 - 1.0);
    if denom > 0.0 {
        chi2 / denom
    } else {
        0.0
    }
}

/// Friedman rank test over `n` blocks (rows) and `k` treatments (columns),
/// with the standard tie correction.
pub fn friedman_test(scores: &[Vec<f64>]) -> Result<FriedmanResult, StatsError> {
    let n = scores.len();
    if n < 2 {
        return Err(StatsError::Shape(format!("need at least 2 blocks, got {n}")));
    }
    let k = scores[0].len();
    if k < 2 {
        return Err(StatsError::Shape(format!("need at least 2 treatments, got {k}")));
    }
    if let Some((i, row)) = scores.iter().enumerate().find(|(_, r)| r.len() != k) {
        return Err(StatsError::Shape(format!("block {i} has {} values, expected {k}", row.len())));
    }
    if scores.iter().flatten().any(|v| !v.is_finite()) {
        return Err(StatsError::Shape("scores must be finite".into()));
    }
    let mut rank_sums = vec![0.0; k];
    let mut tie_sum = 0.0;
    for block in scores {
        let (ranks, ties) = mid_ranks(block);
        for (s, r) in rank_sums.iter_mut().zip(ranks) {
            *s += r;
        }
        tie_sum += ties;
    }
    let (nf, kf) = (n as f64, k as f64);
    let correction = 1.0 - tie_sum / (nf * kf * (kf * kf - 1.0));
    let chi2 = if correction <= 1e-12 {
        0.0
    } else {
        let ss: f64 = rank_sums.iter().map(|r| r * r).sum();
        let raw = 12.0 / (nf * kf * (kf + 1.0)) * ss - 3.0 * nf * (kf + 1.0);
        (raw / correction).max(0.0)
    };
    let df = k - 1;
    Ok(FriedmanResult {
        chi2,
        df,
        p_value: chi_square_sf(chi2, df),
        w: kendall_w(chi2, n, k).clamp(0.0, 1.0),
        n_blocks: n,
        k_treatments: k,
    })
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
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
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..10_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    // Modified Lentz evaluation.
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
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Upper-tail probability of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 || df == 0 {
        return 1.0;
    }
    gamma_q(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0)
}
