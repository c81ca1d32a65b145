//! Statistical checks used by the arbitration: negative-binomial
//! goodness-of-fit for final counts and a Kolmogorov-Smirnov test of the
//! time-rescaled increments.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use super::{EnsembleStats, SimError};

/// Minimum ensemble size for a meaningful chi-square test.
const MIN_GOF_REPLICAS: usize = 1000;
/// Minimum expected count per chi-square bin before merging into the tail.
const MIN_EXPECTED_PER_BIN: f64 = 5.0;

/// Probability mass function of the negative binomial on failures
/// `k in {0, 1, ...}` with `m` required successes of probability `p`:
/// `C(k + m - 1, k) p^m (1 - p)^k`.
pub fn negative_binomial_pmf(k: u64, m: u64, p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    if p == 1.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let (k, m) = (k as f64, m as f64);
    (ln_gamma(k + m) - ln_gamma(k + 1.0) - ln_gamma(m) + m * p.ln() + k * (1.0 - p).ln()).exp()
}

/// Chi-square goodness-of-fit report for final citation counts against the
/// pure-birth final-count law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub n: usize,
    pub sample_mean: f64,
    /// Law mean `m (e^lambda - 1)`.
    pub expected_mean: f64,
    /// Law variance `m e^lambda (e^lambda - 1)`.
    pub expected_variance: f64,
    /// True when `lambda = 0` pinned every count at zero and the test
    /// short-circuited.
    pub degenerate: bool,
}

/// Tests the ensemble's final counts against the sum-of-geometrics law of the
/// attractiveness reading: `c_inf + m ~ NegativeBinomial(m, e^-lambda)`
/// counting total trials, i.e. `c_inf` itself is negative-binomial on
/// failures with success probability `e^-lambda`.
pub fn final_count_distribution_test(
    stats: &EnsembleStats,
    lambda: f64,
    m: u64,
) -> Result<GofReport, SimError> {
    if stats.n < MIN_GOF_REPLICAS {
        return Err(SimError::TooFewReplicas { needed: MIN_GOF_REPLICAS, got: stats.n });
    }
    let n = stats.final_counts.len();
    let sample_mean = stats.final_mean();
    let expected_mean = m as f64 * lambda.exp_m1();
    let expected_variance = m as f64 * lambda.exp() * lambda.exp_m1();

    if lambda == 0.0 {
        // Degenerate law: all mass at zero. Pass iff the sample agrees.
        let all_zero = stats.final_counts.iter().all(|&c| c == 0);
        return Ok(GofReport {
            statistic: 0.0,
            dof: 0,
            p_value: if all_zero { 1.0 } else { 0.0 },
            n,
            sample_mean,
            expected_mean,
            expected_variance,
            degenerate: true,
        });
    }

    let p = (-lambda).exp();
    // Bins of consecutive counts, each closed once its expected mass clears
    // MIN_EXPECTED_PER_BIN; the remainder becomes one tail bin. `uppers[i]`
    // is the largest count belonging to bin i.
    let min_mass = MIN_EXPECTED_PER_BIN / n as f64;
    let mut uppers: Vec<u64> = Vec::new();
    let mut bin_mass: Vec<f64> = Vec::new();
    let mut tail_mass = 1.0f64;
    let mut current = 0.0f64;
    let mut k = 0u64;
    while tail_mass - current >= 2.0 * min_mass {
        current += negative_binomial_pmf(k, m, p);
        if current >= min_mass {
            uppers.push(k);
            bin_mass.push(current);
            tail_mass -= current;
            current = 0.0;
        }
        k += 1;
    }
    bin_mass.push(tail_mass); // everything above the last upper edge
    while bin_mass.len() >= 2 && *bin_mass.last().expect("non-empty") < min_mass {
        let thin_tail = bin_mass.pop().expect("non-empty");
        *bin_mass.last_mut().expect("non-empty") += thin_tail;
        uppers.pop();
    }

    let n_bins = bin_mass.len();
    let mut observed = vec![0u64; n_bins];
    for &c in &stats.final_counts {
        let idx = uppers.partition_point(|&u| u < c);
        observed[idx] += 1;
    }
    let mut statistic = 0.0;
    for (obs, mass) in observed.iter().zip(&bin_mass) {
        let expected = mass * n as f64;
        let d = *obs as f64 - expected;
        statistic += d * d / expected;
    }
    if n_bins < 2 {
        return Err(SimError::InvalidConfig(format!(
            "final-count law too concentrated to bin at lambda = {lambda}, m = {m}"
        )));
    }
    let dof = n_bins - 1;
    let chi2 = ChiSquared::new(dof as f64)
        .map_err(|e| SimError::InvalidConfig(format!("chi-square dof {dof}: {e}")))?;
    let p_value = 1.0 - chi2.cdf(statistic);
    Ok(GofReport {
        statistic,
        dof,
        p_value,
        n,
        sample_mean,
        expected_mean,
        expected_variance,
        degenerate: false,
    })
}

/// One-sample Kolmogorov-Smirnov test against Exponential(1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// KS test of `samples` against the unit-mean exponential distribution,
/// with the Stephens small-sample correction for the p-value.
pub fn ks_test_exp1(samples: &[f64]) -> KsReport {
    let n = samples.len();
    assert!(n > 0, "KS test needs at least one sample");
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = -(-x).exp_m1();
        d = d.max(((i + 1) as f64 / nf - cdf).abs());
        d = d.max((cdf - i as f64 / nf).abs());
    }
    let scaled = (nf.sqrt() + 0.12 + 0.11 / nf.sqrt()) * d;
    KsReport { statistic: d, p_value: kolmogorov_sf(scaled), n }
}

/// Survival function of the Kolmogorov distribution,
/// `Q(x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2)`.
fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
