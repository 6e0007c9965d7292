use std::collections::BTreeMap;

use statrs::function::gamma::ln_gamma;

use super::FeatureAllocation;
use crate::error::{Error, Result};

/// `H_n = Σ_{i=1..n} 1/i`, zero for `n = 0`.
pub fn harmonic_number(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

/// `ln n!`
#[inline]
pub fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// Groups the non-empty columns of `alloc` by their binary pattern and counts
/// each group (`K_h`). Only multiplicities matter, so the key order is
/// irrelevant to callers.
pub fn lof_histogram(alloc: &FeatureAllocation) -> BTreeMap<Vec<bool>, usize> {
    let mut hist = BTreeMap::new();
    for k in 0..alloc.n_cols() {
        let pattern = alloc.pattern(k);
        if pattern.iter().any(|&b| b) {
            *hist.entry(pattern).or_insert(0) += 1;
        }
    }
    hist
}

/// Log-probability of the left-ordered-form class of `alloc`'s binary pattern
/// under an Indian buffet process with mass `alpha`.
///
/// Empty columns are ignored. Factorials are evaluated through `ln Γ` so large
/// `N` does not overflow.
pub fn ibp_log_prob(alloc: &FeatureAllocation, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("IBP mass must be positive, got {alpha}")));
    }
    let n = alloc.n_rows();
    let hist = lof_histogram(alloc);
    let k: usize = hist.values().sum();
    let mut lp = k as f64 * alpha.ln() - alpha * harmonic_number(n);
    lp -= hist.values().map(|&kh| ln_factorial(kh)).sum::<f64>();
    let ln_n_fact = ln_factorial(n);
    for col in 0..alloc.n_cols() {
        let m = alloc.column_count(col);
        if m > 0 {
            lp += ln_factorial(n - m) + ln_factorial(m - 1) - ln_n_fact;
        }
    }
    Ok(lp)
}

/// Log-probability of the labelled binary pattern under the finite
/// beta–Bernoulli model with `k_max` columns whose limit is the IBP
/// (`π_k ~ Beta(α/K, 1)`, integrated out). Columns beyond `alloc.n_cols()`
/// count as empty.
pub fn weak_limit_log_prob(alloc: &FeatureAllocation, alpha: f64, k_max: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("IBP mass must be positive, got {alpha}")));
    }
    if alloc.n_cols() > k_max {
        return Err(Error::Shape(format!(
            "{} columns exceed the truncation level {k_max}",
            alloc.n_cols()
        )));
    }
    let n = alloc.n_rows() as f64;
    let a = alpha / k_max as f64;
    let term = |m: f64| a.ln() + ln_gamma(m + a) + ln_gamma(n - m + 1.0) - ln_gamma(n + 1.0 + a);
    let mut lp = (k_max - alloc.n_cols()) as f64 * term(0.0);
    for col in 0..alloc.n_cols() {
        lp += term(alloc.column_count(col) as f64);
    }
    Ok(lp)
}

/// Log-pmf of a geometric lifetime on `{1, 2, …}` with stopping probability
/// `rho`, censored at `cap`: the value `cap` stands for "lasts at least
/// `cap` rows" and carries the whole tail mass `(1-ρ)^(cap-1)`.
#[inline]
pub fn lifetime_log_pmf(lifetime: u32, rho: f64, cap: u32) -> f64 {
    debug_assert!(lifetime >= 1 && lifetime <= cap);
    let survive = if lifetime == 1 {
        0.0
    } else {
        (lifetime - 1) as f64 * (1.0 - rho).ln()
    };
    if lifetime == cap {
        survive
    } else {
        rho.ln() + survive
    }
}
