//! Standard normal distribution helpers with tail-safe logarithms.
//!
//! Class probabilities in the criteria are Gaussian CDF values whose
//! arguments routinely reach +-40, so everything that feeds a logarithm goes
//! through [`log_cdf`] rather than `cdf(..).ln()`.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};

/// Smallest probability used when a log must be taken of a clamped value.
pub const PROB_FLOOR: f64 = 1e-300;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn log_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Standard normal CDF, Psi(z).
pub fn cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// log Psi(z), accurate in both tails.
pub fn log_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z == f64::INFINITY {
        return 0.0;
    }
    if z == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if z > 5.0 {
        (-0.5 * erfc(z * FRAC_1_SQRT_2)).ln_1p()
    } else if z > -30.0 {
        (0.5 * erfc(-z * FRAC_1_SQRT_2)).ln()
    } else {
        // Asymptotic series of the Mills ratio.
        let z2 = z * z;
        let inv = 1.0 / z2;
        let series = 1.0 - inv * (1.0 - 3.0 * inv * (1.0 - 5.0 * inv * (1.0 - 7.0 * inv)));
        -0.5 * z2 - (-z).ln() - LN_SQRT_2PI + series.ln()
    }
}

/// log(1 - exp(x)) for x <= 0.
pub fn log1m_exp(x: f64) -> f64 {
    if x >= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x > -LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// log(Psi(hi) - Psi(lo)) for lo <= hi; either end may be infinite.
pub fn log_cdf_diff(lo: f64, hi: f64) -> f64 {
    if !(hi > lo) {
        return f64::NEG_INFINITY;
    }
    if lo == f64::NEG_INFINITY {
        return log_cdf(hi);
    }
    if hi == f64::INFINITY {
        return log_cdf(-lo);
    }
    if lo >= 0.0 {
        let a = log_cdf(-lo);
        let b = log_cdf(-hi);
        a + log1m_exp(b - a)
    } else if hi <= 0.0 {
        let a = log_cdf(hi);
        let b = log_cdf(lo);
        a + log1m_exp(b - a)
    } else {
        (-(cdf(lo) + cdf(-hi))).ln_1p()
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log of a single entropy term `-p ln p`, given `ln p`.
fn log_entropy_term(log_p: f64) -> f64 {
    if log_p == f64::NEG_INFINITY || log_p >= 0.0 {
        f64::NEG_INFINITY
    } else {
        log_p + (-log_p).ln()
    }
}

/// Logarithm of the Shannon entropy (nats) of a discrete distribution given
/// by its log-probabilities. Stays finite when the entropy is far below
/// machine epsilon.
pub fn log_entropy(log_probs: &[f64]) -> f64 {
    let mut terms = [f64::NEG_INFINITY; 8];
    if log_probs.len() <= terms.len() {
        for (t, &lp) in terms.iter_mut().zip(log_probs) {
            *t = log_entropy_term(lp);
        }
        log_sum_exp(&terms[..log_probs.len()])
    } else {
        let terms: Vec<f64> = log_probs.iter().map(|&lp| log_entropy_term(lp)).collect();
        log_sum_exp(&terms)
    }
}

/// Entropy (nats) of the partition of N(0, 1) by the ascending cut points
/// `cuts` (standardized thresholds). With one cut point this is the binary
/// entropy of Psi(cut).
pub fn interval_entropy(cuts: &[f64]) -> f64 {
    log_interval_entropy(cuts).exp()
}

pub fn log_interval_entropy(cuts: &[f64]) -> f64 {
    let mut log_probs = [0.0; 8];
    let k = cuts.len();
    if k + 1 > log_probs.len() {
        let mut lp = Vec::with_capacity(k + 1);
        interval_log_probs(cuts, |v| lp.push(v));
        return log_entropy(&lp);
    }
    let mut i = 0;
    interval_log_probs(cuts, |v| {
        log_probs[i] = v;
        i += 1;
    });
    log_entropy(&log_probs[..=k])
}

fn interval_log_probs(cuts: &[f64], mut push: impl FnMut(f64)) {
    let mut lo = f64::NEG_INFINITY;
    for &c in cuts {
        push(log_cdf_diff(lo, c));
        lo = c;
    }
    push(log_cdf_diff(lo, f64::INFINITY));
}

/// Binary entropy (nats) of a Bernoulli(p) variable, 0 log 0 = 0.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.ln() };
    term(p) + term(1.0 - p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_known_values() {
        assert!((cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((cdf(1.6449) - 0.95).abs() < 1e-4);
        assert!((cdf(-1.96) - 0.024_997_895).abs() < 1e-8);
    }

    #[test]
    fn log_cdf_is_continuous_across_branches() {
        for &z in &[5.0, -30.0] {
            let below = log_cdf(z - 1e-9);
            let above = log_cdf(z + 1e-9);
            assert!(((below - above) / below).abs() < 1e-7, "{z}: {below} vs {above}");
        }
    }

    #[test]
    fn log_cdf_deep_tail() {
        // log Psi(-40) = -804.608442013754...
        assert!((log_cdf(-40.0) + 804.608_442_013_754).abs() < 1e-9);
        assert!(log_cdf(40.0) <= 0.0);
        assert!(log_cdf(-1e5).is_finite());
    }

    #[test]
    fn cdf_diff_matches_naive_in_bulk() {
        for &(lo, hi) in &[(-1.0, 0.5), (0.2, 1.5), (-2.0, -0.3), (-0.1, 0.1)] {
            let naive = (cdf(hi) - cdf(lo)).ln();
            assert!((log_cdf_diff(lo, hi) - naive).abs() < 1e-12);
        }
        // Far upper tail where the naive difference is 0.
        let v = log_cdf_diff(20.0, 21.0);
        assert!(v.is_finite() && v < -200.0);
    }

    #[test]
    fn entropy_matches_direct_formula() {
        for &c in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let p = cdf(c);
            assert!((interval_entropy(&[c]) - binary_entropy(p)).abs() < 1e-13);
        }
        assert!((interval_entropy(&[0.0]) - LN_2).abs() < 1e-15);
        let three = interval_entropy(&[-0.4307, 0.4307]);
        assert!((three - 3f64.ln()).abs() < 1e-4);
    }

    #[test]
    fn tiny_entropy_stays_positive() {
        let h = interval_entropy(&[12.0]);
        assert!(h > 0.0 && h < 1e-30);
        assert!(log_interval_entropy(&[45.0]).is_finite());
    }
}
