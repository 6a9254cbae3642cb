use serde::Serialize;

use crate::error::{MdlError, Result};
use crate::models::pmf::FinitePmf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DivergenceKind {
    Renyi,
    Kl,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivergenceValue {
    /// Order; `1` for Kullback-Leibler.
    pub lambda: f64,
    /// Nats; `+∞` when the supports make it infinite.
    pub value: f64,
    pub kind: DivergenceKind,
}

/// `d̄_λ(p‖q) = −(1/(1−λ)) log Σ_x p(x) (q(x)/p(x))^{1−λ}` over raw
/// probability slices. Infinite only when `p` and `q` have disjoint
/// supports; rounding below zero is clamped.
pub fn renyi(p: &[f64], q: &[f64], lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(MdlError::Domain {
            theta: vec![],
            reason: format!("Renyi order must lie in (0, 1), got {lambda}"),
        });
    }
    if p.len() != q.len() {
        return Err(MdlError::precondition("divergence between pmfs over different alphabets"));
    }
    let s: f64 = p
        .iter()
        .zip(q)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| a.powf(lambda) * b.powf(1.0 - lambda))
        .sum();
    if s <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((-s.ln() / (1.0 - lambda)).max(0.0))
}

/// `D(p‖q) = Σ p log(p/q)`; `+∞` when `q` misses part of `p`'s support.
pub fn kl(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(MdlError::precondition("divergence between pmfs over different alphabets"));
    }
    let mut d = 0.0;
    for (a, b) in p.iter().zip(q) {
        if *a > 0.0 {
            if *b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            d += a * (a / b).ln();
        }
    }
    Ok(d.max(0.0))
}

/// KL against a pmf given by log-probabilities, as the codebook stores it.
pub fn kl_log(p: &[f64], log_q: &[f64]) -> f64 {
    p.iter()
        .zip(log_q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, lq)| a * (a.ln() - lq))
        .sum::<f64>()
        .max(0.0)
}

/// Rényi divergence against a pmf given by log-probabilities.
pub fn renyi_log(p: &[f64], log_q: &[f64], lambda: f64) -> Result<f64> {
    let q: Vec<f64> = log_q.iter().map(|l| l.exp()).collect();
    renyi(p, &q, lambda)
}

pub fn renyi_divergence(p: &FinitePmf, q: &FinitePmf, lambda: f64) -> Result<DivergenceValue> {
    Ok(DivergenceValue {
        lambda,
        value: renyi(p.probs(), q.probs(), lambda)?,
        kind: DivergenceKind::Renyi,
    })
}

pub fn kl_divergence(p: &FinitePmf, q: &FinitePmf) -> Result<DivergenceValue> {
    Ok(DivergenceValue {
        lambda: 1.0,
        value: kl(p.probs(), q.probs())?,
        kind: DivergenceKind::Kl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_zero() {
        let p = [0.2, 0.3, 0.5];
        for l in [0.1, 0.5, 0.9] {
            assert_eq!(renyi(&p, &p, l).unwrap(), 0.0);
        }
        assert_eq!(kl(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn half_order_bernoulli() {
        let v = renyi(&[0.5, 0.5], &[0.75, 0.25], 0.5).unwrap();
        let want = -2.0 * (0.125f64.sqrt() + 0.375f64.sqrt()).ln();
        assert!((v - want).abs() < 1e-15);
        assert!((v - 0.0693).abs() < 5e-5);
    }

    #[test]
    fn approaches_kl_from_below() {
        let (p, q) = ([0.1, 0.6, 0.3], [0.4, 0.4, 0.2]);
        let d = kl(&p, &q).unwrap();
        let mut prev = 0.0;
        for l in [0.9, 0.99, 0.999, 0.9999, 0.99999] {
            let r = renyi(&p, &q, l).unwrap();
            assert!(r >= prev && r <= d);
            prev = r;
        }
        assert!((d - prev).abs() < 1e-4);
    }

    #[test]
    fn order_outside_unit_interval_is_a_domain_error() {
        assert!(matches!(renyi(&[1.0], &[1.0], 1.0), Err(MdlError::Domain { .. })));
        assert!(matches!(renyi(&[1.0], &[1.0], 0.0), Err(MdlError::Domain { .. })));
    }

    #[test]
    fn support_mismatch() {
        assert_eq!(kl(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), f64::INFINITY);
        assert!(renyi(&[0.5, 0.5], &[1.0, 0.0], 0.5).unwrap().is_finite());
        assert_eq!(renyi(&[1.0, 0.0], &[0.0, 1.0], 0.5).unwrap(), f64::INFINITY);
    }
}
