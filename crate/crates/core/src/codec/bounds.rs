//! Closed-form regret bounds for the interior code, with every term
//! itemized.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::bundle::TiltingGrid;
use crate::codec::config::CodeConfig;
use crate::error::{MdlError, Result};
use crate::models::certify::AssumptionConstants;
use crate::models::family::Family;
use crate::quantizer::{cardinality_bound, BoundConstants, CardinalityBound};

#[derive(Debug, Clone, Serialize)]
pub struct RegretReport {
    pub n: u64,
    pub k: usize,
    pub alpha: f64,
    /// Achieved regret, when a sequence or sweep was evaluated.
    pub achieved: Option<f64>,
    pub c_n: f64,
    pub c_gn: Option<f64>,
    pub r: f64,
    pub f: Option<f64>,
    pub f_ne: Option<f64>,
    /// Bound on `REG/α` for interior sequences.
    pub bound: f64,
    /// `α (bound + l_1)`: the bound for the combined code.
    pub reg_bar: f64,
    /// Sample size beyond which the non-exponential bound is proven.
    pub n0: Option<f64>,
    pub asymptotic_regime: Option<bool>,
    pub terms: BTreeMap<String, f64>,
    pub cardinality: CardinalityBound,
}

/// `C_n = (1 + κ√K a n^{-β})(1 + κ√K a n^{-1/2} ζ^{-1/2} / 2)`.
pub fn c_n(c: &AssumptionConstants, k: usize, n: u64, a: f64, beta: f64) -> f64 {
    let s = (k as f64).sqrt();
    let nf = n as f64;
    (1.0 + c.kappa * s * a * nf.powf(-beta)) * (1.0 + c.kappa * s * a * nf.powf(-0.5) / c.zeta.sqrt() / 2.0)
}

/// `C_{G_n,n} = C_n (1 + κ′√K a ζ^{-1/2} n^{-1/2} / 2)`.
pub fn c_gn(c: &AssumptionConstants, k: usize, n: u64, a: f64, beta: f64) -> f64 {
    let s = (k as f64).sqrt();
    c_n(c, k, n, a, beta) * (1.0 + c.kappa_prime * s * a / c.zeta.sqrt() * (n as f64).powf(-0.5) / 2.0)
}

/// Interior bound for canonical exponential families:
/// `(K/2) log n + log ∫|J|^{1/2} + C_n K a²/(8α) − K log a + r(n)`.
pub fn exp_regret_bound(
    family: &dyn Family,
    n: u64,
    config: &CodeConfig,
    c: &AssumptionConstants,
    bc: &BoundConstants,
) -> Result<RegretReport> {
    if !family.is_exponential() {
        return Err(MdlError::Unsupported(format!(
            "{} is not an exponential family in canonical parameters; use the tilted-code bound",
            family.name()
        )));
    }
    config.validate()?;
    let k = family.dim();
    let kf = k as f64;
    let (a, alpha) = (config.a, config.alpha);
    let card = cardinality_bound(bc, n, a, config.beta)?;
    let cn = c_n(c, k, n, a, config.beta);
    let f = cn * kf * a * a / (8.0 * alpha) - kf * a.ln() + card.r;
    let bound = 0.5 * kf * (n as f64).ln() + bc.integral.ln() + f;
    let l1 = config.l1(n);
    let mut terms = BTreeMap::new();
    terms.insert("half_k_log_n".into(), 0.5 * kf * (n as f64).ln());
    terms.insert("log_fisher_volume".into(), bc.integral.ln());
    terms.insert("quantization".into(), cn * kf * a * a / (8.0 * alpha));
    terms.insert("minus_k_log_a".into(), -kf * a.ln());
    terms.insert("r".into(), card.r);
    terms.insert("l1".into(), l1);
    Ok(RegretReport {
        n,
        k,
        alpha,
        achieved: None,
        c_n: cn,
        c_gn: None,
        r: card.r,
        f: Some(f),
        f_ne: None,
        bound,
        reg_bar: alpha * (bound + l1),
        n0: None,
        asymptotic_regime: None,
        terms,
        cardinality: card,
    })
}

/// Interior bound of the tilted code:
/// `(K/2) log(n/2π) + log ∫|J|^{1/2} + f_ne(n)`, together with the sample
/// size `n_0` past which it is proven.
pub fn nonexp_regret_bound(
    family: &dyn Family,
    n: u64,
    config: &CodeConfig,
    c: &AssumptionConstants,
    bc: &BoundConstants,
    tilts: &TiltingGrid,
) -> Result<RegretReport> {
    config.validate()?;
    tilts.check_rate(config.alpha)?;
    let k = family.dim();
    let kf = k as f64;
    let nf = n as f64;
    let (a, alpha) = (config.a, config.alpha);
    let card = cardinality_bound(bc, n, a, config.beta)?;
    let cn = c_n(c, k, n, a, config.beta);
    let cg = c_gn(c, k, n, a, config.beta);
    let delta_n = tilts.delta_n;
    let l2 = tilts.l2;
    let quant = cg * kf * a * a * (1.0 + kf * delta_n) / (8.0 * alpha);
    let f_ne = 0.5 * kf * (2.0 * PI).ln() - kf * a.ln() + quant + card.r + l2;
    let bound = 0.5 * kf * (nf / (2.0 * PI)).ln() + bc.integral.ln() + f_ne;
    let l1 = config.l1(n);

    let c_eps = c.c_epsilon;
    let rate = tilts.gamma * tilts.g / (2.0 * tilts.b) - config.nu * alpha;
    let n0_terms = [
        kf * a * a / (4.0 * c.zeta) * (1.0 / (c.epsilon * c.epsilon)).max(1.0 / (c.delta_ball * c.delta_ball)),
        ((c_eps * kf * a * a + alpha * (2.0 * kf * kf).ln()) / rate).exp(),
        1.0 / (c.kappa.powi(4) * kf * kf * a.powi(4)),
        4.0 * c.zeta / (c.kappa * c.kappa * kf * a * a),
    ];
    let n0 = n0_terms.iter().copied().fold(0.0, f64::max);
    let mut terms = BTreeMap::new();
    terms.insert("half_k_log_n_over_2pi".into(), 0.5 * kf * (nf / (2.0 * PI)).ln());
    terms.insert("log_fisher_volume".into(), bc.integral.ln());
    terms.insert("half_k_log_2pi".into(), 0.5 * kf * (2.0 * PI).ln());
    terms.insert("minus_k_log_a".into(), -kf * a.ln());
    terms.insert("quantization".into(), quant);
    terms.insert("r".into(), card.r);
    terms.insert("l2".into(), l2);
    terms.insert("l1".into(), l1);
    terms.insert("delta_n".into(), delta_n);
    terms.insert("c_epsilon".into(), c_eps);
    terms.insert("rate".into(), rate);
    for (i, t) in n0_terms.iter().enumerate() {
        terms.insert(format!("n0_term_{}", i + 1), *t);
    }
    Ok(RegretReport {
        n,
        k,
        alpha,
        achieved: None,
        c_n: cn,
        c_gn: Some(cg),
        r: card.r,
        f: None,
        f_ne: Some(f_ne),
        bound,
        reg_bar: alpha * (bound + l1),
        n0: Some(n0),
        asymptotic_regime: Some(nf > n0),
        terms,
        cardinality: card,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::bernoulli::BernoulliCanonical;
    use crate::models::certify::certify_assumptions;
    use crate::models::family::ConstantFisher;
    use crate::models::space::ParamSpace;

    #[test]
    fn c_n_tends_to_one() {
        let fam = BernoulliCanonical::new(-2.0, 2.0).unwrap();
        let c = certify_assumptions(&fam, 50).unwrap();
        let mut prev = f64::INFINITY;
        for n in [10u64, 100, 1_000, 10_000, 1_000_000, 1_000_000_000_000] {
            let v = c_n(&c, 1, n, 2.0, 0.25);
            assert!(v > 1.0 && v < prev);
            prev = v;
        }
        assert!(prev < 1.01);
    }

    #[test]
    fn plug_in_unit_interval() {
        // K = 1, J ≡ 1 on [0, 1], a = 2, α = 2, n = 10⁴, evaluated by hand
        let geom = ConstantFisher::identity(ParamSpace::new_box(vec![0.0], vec![1.0]).unwrap());
        let bc = BoundConstants::constant(&geom).unwrap();
        let card = cardinality_bound(&bc, 10_000, 2.0, 0.25).unwrap();
        let r = (1.0 + 2.0 * 0.1f64).ln() + (1.0 + 2.0 * 1.0 * 2.0 * 0.1f64).ln();
        assert!((card.r - r).abs() < 1e-12);
        let log_bound = 0.5 * 10_000f64.ln() - 2f64.ln() + r;
        assert!((card.log_bound - log_bound).abs() < 1e-12);
    }
}
