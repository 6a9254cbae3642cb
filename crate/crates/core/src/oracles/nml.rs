use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::Result;
use crate::linalg::log_sum_exp;
use crate::models::family::Family;
use crate::models::mle::mle_counts;
use crate::oracles::weighted_types;

/// `log Σ_{x^n} p_θ̂(x^n)`, with θ̂ the MLE restricted to Θ, by exact
/// enumeration.
pub fn shtarkov_complexity(family: &dyn Family, n: u64, cap: u64) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let types = weighted_types(n, family.alphabet_size(), cap)?;
    let terms = types
        .par_iter()
        .map(|(c, w)| Ok(w + mle_counts(family, c)?.loglik))
        .collect::<Result<Vec<f64>>>()?;
    Ok(log_sum_exp(terms))
}

/// `log Σ_k C(n,k) (k/n)^k (1 − k/n)^{n−k}`: the unrestricted Bernoulli
/// value.
pub fn bernoulli_shtarkov_closed_form(n: u64) -> f64 {
    let lf = crate::types::log_factorials(n);
    let nf = n as f64;
    let xlogy = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * y.ln() };
    log_sum_exp((0..=n).map(|k| {
        let kf = k as f64;
        lf[n as usize] - lf[k as usize] - lf[(n - k) as usize] + xlogy(kf, kf / nf) + xlogy(nf - kf, 1.0 - kf / nf)
    }))
}

/// `(K/2) log(n/2π) + log ∫|J|^{1/2}`, the leading terms of the minimax
/// regret.
pub fn asymptotic_minimax_regret(k: usize, n: u64, fisher_volume: f64) -> f64 {
    0.5 * k as f64 * (n as f64 / (2.0 * PI)).ln() + fisher_volume.ln()
}
