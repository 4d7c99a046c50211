//! Statistical test backends: Kolmogorov-Smirnov tests, Wilson score
//! intervals and small summary helpers.
//!
//! The KS statistic is computed exactly on the merged order statistics;
//! p-values use the asymptotic Kolmogorov distribution with the usual
//! finite-sample effective-size correction, series truncated at relative
//! 1e-8.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("undersized sample: need at least {need}, got {got}")]
    Undersized { need: usize, got: usize },
    #[error("empty sample")]
    EmptySample,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Outcome of a two-sample Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KsReport {
    pub statistic: f64,
    pub p_value: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// One-sided KS statistics in both directions.
///
/// `d_b_below_a` is `sup_t (F_b(t) - F_a(t))`; it is large when sample `b`
/// sits stochastically *below* sample `a`, so a small `p_b_below_a`
/// rejects the dominance `b >=_st a`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OneSidedKsReport {
    pub d_b_below_a: f64,
    pub p_b_below_a: f64,
    pub d_a_below_b: f64,
    pub p_a_below_b: f64,
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_unstable_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    v
}

/// Survival function of the Kolmogorov distribution,
/// `Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2)`,
/// truncated when a term falls below 1e-8 of the partial sum.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=200 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-8 * sum.abs().max(1e-300) {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let sqrt_ne = n_eff.sqrt();
    let lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d;
    kolmogorov_sf(lambda)
}

fn require_size(s: &[f64], need: usize) -> Result<(), StatsError> {
    if s.len() < need {
        Err(StatsError::Undersized { need, got: s.len() })
    } else {
        Ok(())
    }
}

/// Exact two-sample KS statistic with asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsReport, StatsError> {
    require_size(a, 30)?;
    require_size(b, 30)?;
    let (xa, xb) = (sorted(a), sorted(b));
    let statistic = ks_statistic_sorted(&xa, &xb);
    let n_eff = (xa.len() * xb.len()) as f64 / (xa.len() + xb.len()) as f64;
    Ok(KsReport {
        statistic,
        p_value: ks_p_value(statistic, n_eff),
        n_a: xa.len(),
        n_b: xb.len(),
    })
}

fn ks_statistic_sorted(xa: &[f64], xb: &[f64]) -> f64 {
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let t = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= t {
            i += 1;
        }
        while j < xb.len() && xb[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One-sided KS dominance statistics between two samples, with the
/// asymptotic one-sided tail `exp(-2 n_eff d^2)`.
pub fn ks_one_sided(a: &[f64], b: &[f64]) -> Result<OneSidedKsReport, StatsError> {
    require_size(a, 30)?;
    require_size(b, 30)?;
    let (xa, xb) = (sorted(a), sorted(b));
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let (mut d_ab, mut d_ba) = (0.0f64, 0.0f64);
    while i < xa.len() && j < xb.len() {
        let t = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= t {
            i += 1;
        }
        while j < xb.len() && xb[j] <= t {
            j += 1;
        }
        let diff = i as f64 / na - j as f64 / nb;
        d_ab = d_ab.max(diff);
        d_ba = d_ba.max(-diff);
    }
    let n_eff = na * nb / (na + nb);
    let p = |d: f64| (-2.0 * n_eff * d * d).exp().clamp(0.0, 1.0);
    Ok(OneSidedKsReport {
        d_b_below_a: d_ba,
        p_b_below_a: p(d_ba),
        d_a_below_b: d_ab,
        p_a_below_b: p(d_ab),
    })
}

/// KS test between an importance-weighted sample and an unweighted one.
///
/// The weighted empirical CDF uses self-normalized weights. Its effective
/// sample size is the delta-method variance of the CDF estimator taken at
/// the *worst* point of a quantile grid, so the reported p-value errs on
/// the conservative side when weights are uneven.
pub fn ks_two_sample_weighted(
    a_values: &[f64],
    a_weights: &[f64],
    b: &[f64],
) -> Result<KsReport, StatsError> {
    if a_values.len() != a_weights.len() {
        return Err(StatsError::InvalidParameter(
            "values/weights length mismatch".into(),
        ));
    }
    require_size(a_values, 30)?;
    require_size(b, 30)?;
    if a_weights.iter().any(|&w| !(w > 0.0)) {
        return Err(StatsError::InvalidParameter(
            "weights must be strictly positive".into(),
        ));
    }
    let mut order: Vec<usize> = (0..a_values.len()).collect();
    order.sort_unstable_by(|&i, &j| a_values[i].partial_cmp(&a_values[j]).expect("NaN"));
    let total: f64 = a_weights.iter().sum();
    let xa: Vec<f64> = order.iter().map(|&i| a_values[i]).collect();
    let wa: Vec<f64> = order.iter().map(|&i| a_weights[i] / total).collect();
    let xb = sorted(b);

    // Exact sup-distance between the weighted CDF of `a` and the CDF of `b`.
    let nb = xb.len() as f64;
    let (mut i, mut j) = (0usize, 0usize);
    let mut fa = 0.0f64;
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let t = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= t {
            fa += wa[i];
            i += 1;
        }
        while j < xb.len() && xb[j] <= t {
            j += 1;
        }
        d = d.max((fa - j as f64 / nb).abs());
    }

    // Effective size: Var(F_w(x)) ~ sum_i w_i^2 (1{v_i<=x} - F)^2, matched
    // against the binomial F(1-F)/n_eff, minimized over mid-range levels.
    let mut cum_w = 0.0;
    let mut cum_w2 = 0.0;
    let tot_w2: f64 = wa.iter().map(|w| w * w).sum();
    let mut n_eff_a = f64::INFINITY;
    for &w in &wa {
        cum_w += w;
        cum_w2 += w * w;
        if !(0.05..=0.95).contains(&cum_w) {
            continue;
        }
        let var = (1.0 - cum_w) * (1.0 - cum_w) * cum_w2 + cum_w * cum_w * (tot_w2 - cum_w2);
        if var > 0.0 {
            n_eff_a = n_eff_a.min(cum_w * (1.0 - cum_w) / var);
        }
    }
    if !n_eff_a.is_finite() {
        n_eff_a = xa.len() as f64;
    }
    let n_eff = n_eff_a * nb / (n_eff_a + nb);
    Ok(KsReport {
        statistic: d,
        p_value: ks_p_value(d, n_eff),
        n_a: xa.len(),
        n_b: xb.len(),
    })
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_ci(successes: usize, n: usize, level: f64) -> Result<(f64, f64), StatsError> {
    if n == 0 {
        return Err(StatsError::EmptySample);
    }
    if successes > n {
        return Err(StatsError::InvalidParameter(format!(
            "successes {successes} > n {n}"
        )));
    }
    if !(0.0..1.0).contains(&level) {
        return Err(StatsError::InvalidParameter(format!(
            "confidence level {level} outside (0,1)"
        )));
    }
    let z = inverse_normal_cdf(0.5 + level / 2.0);
    let nf = n as f64;
    let x = successes as f64;
    let z2 = z * z;
    let center = (x + z2 / 2.0) / (nf + z2);
    let half = z / (nf + z2) * (x * (nf - x) / nf + z2 / 4.0).sqrt();
    // Degenerate counts hit the interval ends exactly; avoid fp residue.
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (center + half).min(1.0) };
    Ok((lo, hi))
}

/// Inverse of the standard normal CDF (Acklam's rational approximation,
/// absolute error ~1e-9).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "probability {p} outside (0,1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
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
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
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

/// Arithmetic mean.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the sample mean.
pub fn standard_error(xs: &[f64]) -> f64 {
    (sample_variance(xs) / xs.len() as f64).sqrt()
}

/// Empirical quantile (linear interpolation between order statistics).
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    assert!((0.0..=1.0).contains(&q));
    let v = sorted(xs);
    if v.len() == 1 {
        return v[0];
    }
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    v[lo] + frac * (v[hi] - v[lo])
}

/// Median shorthand.
pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn ks_identical_samples() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_disjoint_supports() {
        let a: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..50).map(|i| 1000.0 + i as f64).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn ks_rejects_undersized() {
        let a = vec![0.0; 10];
        let b = vec![0.0; 100];
        assert!(matches!(
            ks_two_sample(&a, &b),
            Err(StatsError::Undersized { .. })
        ));
    }

    #[test]
    fn ks_hand_computed_statistic() {
        // F_a jumps to 0.5 at 1 and 1.0 at 4; F_b jumps to 0.75 at 1.
        let a: Vec<f64> = [1.0, 1.0, 4.0, 4.0].iter().cycle().take(40).cloned().collect();
        let b: Vec<f64> = [1.0, 1.0, 1.0, 4.0].iter().cycle().take(40).cloned().collect();
        let r = ks_two_sample(&a, &b).unwrap();
        assert!((r.statistic - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ks_calibration_standard_normal() {
        // Two same-law samples: p > 0.01 in at least 95 of 100 seeded reps.
        let mut passes = 0;
        for rep in 0..100u64 {
            let draw = |lane: u64| -> Vec<f64> {
                let mut rng = stream(1234, lane, rep);
                (0..10_000)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect()
            };
            let r = ks_two_sample(&draw(0), &draw(1)).unwrap();
            if r.p_value > 0.01 {
                passes += 1;
            }
        }
        assert!(passes >= 95, "only {passes}/100 calibration reps passed");
    }

    #[test]
    fn one_sided_detects_shift_direction() {
        let mut rng = stream(5, 0, 0);
        let a: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 0.5).collect();
        let r = ks_one_sided(&a, &b).unwrap();
        // b is stochastically above a: F_a dominates F_b pointwise, so the
        // "a below b" direction is the significant one.
        assert!(r.p_a_below_b < 1e-6, "p_a_below_b = {}", r.p_a_below_b);
        assert!(r.p_b_below_a > 0.9, "p_b_below_a = {}", r.p_b_below_a);
    }

    #[test]
    fn weighted_ks_uniform_weights_matches_plain() {
        let mut rng = stream(7, 0, 0);
        let a: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
        let w = vec![1.0; a.len()];
        let plain = ks_two_sample(&a, &b).unwrap();
        let weighted = ks_two_sample_weighted(&a, &w, &b).unwrap();
        assert!((plain.statistic - weighted.statistic).abs() < 1e-12);
        assert!((plain.p_value - weighted.p_value).abs() < 0.05);
    }

    #[test]
    fn weighted_ks_calibration() {
        // Weighted target: density proportional to w(x) under the proposal.
        // Proposal N(0,1) with weights exp(x/2) tilts to N(1/2,1); compare
        // against direct N(1/2,1) draws over seeded repetitions.
        let mut passes = 0;
        for rep in 0..40u64 {
            let mut rng = stream(99, 0, rep);
            let a: Vec<f64> = (0..4000)
                .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                .collect();
            let w: Vec<f64> = a.iter().map(|x| (x / 2.0).exp()).collect();
            let mut rng2 = stream(99, 1, rep);
            let b: Vec<f64> = (0..4000)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng2);
                    z + 0.5
                })
                .collect();
            let r = ks_two_sample_weighted(&a, &w, &b).unwrap();
            if r.p_value > 0.01 {
                passes += 1;
            }
        }
        assert!(passes >= 36, "only {passes}/40 weighted calibration reps passed");
    }

    #[test]
    fn wilson_edges() {
        let (lo, _) = wilson_ci(0, 50, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        let (_, hi) = wilson_ci(50, 50, 0.95).unwrap();
        assert_eq!(hi, 1.0);
        // All-ones sample against threshold 2 at n=100: upper CI < 0.04.
        let (_, hi) = wilson_ci(0, 100, 0.95).unwrap();
        assert!(hi < 0.04);
    }

    #[test]
    fn wilson_half_and_half() {
        let (lo, hi) = wilson_ci(50, 100, 0.95).unwrap();
        assert!((lo - 0.404).abs() < 1e-3, "lo = {lo}");
        assert!((hi - 0.596).abs() < 1e-3, "hi = {hi}");
        assert!((lo + hi - 1.0).abs() < 1e-3);
    }

    #[test]
    fn inverse_normal_known_values() {
        // Frozen reference quantiles of the standard normal law.
        let cases = [
            (0.5, 0.0),
            (0.975, 1.959963984540054),
            (0.99, 2.3263478740408408),
            (0.001, -3.090232306167813),
            (0.999, 3.090232306167813),
        ];
        for (p, x) in cases {
            assert!(
                (inverse_normal_cdf(p) - x).abs() < 2e-8,
                "p = {p}: {} vs {x}",
                inverse_normal_cdf(p)
            );
        }
    }

    #[test]
    fn quantile_and_median() {
        let xs = vec![4.0, 1.0, 3.0, 2.0];
        assert_eq!(median(&xs), 2.5);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
    }
}
