use std::collections::BTreeMap;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::codec::{CodeConfig, Codebook};
use crate::error::{MdlError, Result};
use crate::models::family::{probs, FamilyRef};
use crate::models::pmf::{Counts, FinitePmf};
use crate::oracles::divergence::{kl_log, renyi_log};
use crate::oracles::weighted_types;
use crate::types::representative;

/// Chain checks are allowed to fail by this much.
pub const CHAIN_TOL: f64 = 1e-9;

/// Smallest Monte Carlo sample accepted.
pub const MIN_TRIALS: u64 = 1_000;

/// Independent stream `idx` of the generator seeded by `seed`; results do
/// not depend on which thread runs which trial.
pub fn trial_rng(seed: u64, idx: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(idx);
    rng
}

/// One tail level of the Monte Carlo check.
#[derive(Debug, Clone, Serialize)]
pub struct TailRow {
    pub b: f64,
    pub violations: u64,
    pub frequency: f64,
    /// `exp(−n b / α)`.
    pub bound: f64,
    pub sigma: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RiskCertificate {
    pub check: String,
    pub family: String,
    pub theta_star: Vec<f64>,
    pub n: u64,
    pub alpha: f64,
    pub lambda: f64,
    pub config: CodeConfig,
    /// `E d̄_λ(p*‖p̈)`.
    pub risk: Option<f64>,
    /// `E log(p*/p_2p) / n`.
    pub redundancy_per_n: Option<f64>,
    /// `min_{θ,ξ} D(p*‖p̄_{θ,ξ}) + α L̄_n(θ,ξ)/n`.
    pub resolvability: Option<f64>,
    /// `redundancy/n − risk`.
    pub risk_margin: Option<f64>,
    /// `resolvability − redundancy/n`.
    pub resolvability_margin: Option<f64>,
    /// Sequence with the largest pointwise excess of divergence over
    /// per-symbol redundancy.
    pub witness: Option<Vec<usize>>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub tail: Vec<TailRow>,
    pub passed: bool,
}

impl RiskCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificates serialize")
    }
}

fn star(family: &FamilyRef, theta_star: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    family.space().check(theta_star)?;
    let p = probs(family.as_ref(), theta_star);
    let lp = p.iter().map(|v| v.ln()).collect();
    Ok((p, lp))
}

fn log_prob(c: &Counts, lp: &[f64]) -> f64 {
    c.support().map(|(x, k)| k as f64 * lp[x]).sum()
}

/// Exact `E d̄_λ(p*‖p̈) ≤ redundancy/n ≤ resolvability` for the interior
/// two-part code, by enumeration of `𝒳^n`.
pub fn verify_theorem1(family: &FamilyRef, theta_star: &[f64], n: u64, config: &CodeConfig, cap: u64) -> Result<RiskCertificate> {
    config.check_lambda()?;
    let cb = Codebook::build(family.clone(), n, config)?;
    verify_theorem1_with(&cb, theta_star, cap)
}

pub fn verify_theorem1_with(cb: &Codebook, theta_star: &[f64], cap: u64) -> Result<RiskCertificate> {
    let config = &cb.config;
    config.check_lambda()?;
    let family = cb.family();
    let (p, lp) = star(family, theta_star)?;
    let n = cb.n;
    let nf = n as f64;
    let types = weighted_types(n, family.alphabet_size(), cap)?;
    let rows = types
        .par_iter()
        .map(|(c, w)| {
            let lw = w + log_prob(c, &lp);
            if lw == f64::NEG_INFINITY {
                return Ok(None);
            }
            let e = cb.encode_plain(c)?;
            let d = renyi_log(&p, &e.log_probs, config.lambda)?;
            let red = (e.total + log_prob(c, &lp)) / nf;
            Ok(Some((lw.exp(), d, red)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut risk, mut redundancy) = (0.0, 0.0);
    let mut worst: Option<(f64, usize)> = None;
    for (i, row) in rows.iter().enumerate() {
        if let Some((w, d, red)) = row {
            risk += w * d;
            redundancy += w * red;
            if worst.is_none_or(|(b, _)| d - red > b) {
                worst = Some((d - red, i));
            }
        }
    }
    let ln = cb.grid.code_length();
    let resolvability = (0..cb.grid.len())
        .flat_map(|i| (0..cb.tilt_count()).map(move |j| (i, j)))
        .map(|(i, j)| kl_log(&p, cb.row(i, j)) + config.alpha * (ln + cb.tilt_length(j)) / nf)
        .fold(f64::INFINITY, f64::min);
    let risk_margin = redundancy - risk;
    let resolvability_margin = resolvability - redundancy;
    Ok(RiskCertificate {
        check: "theorem1".into(),
        family: family.name(),
        theta_star: theta_star.to_vec(),
        n,
        alpha: config.alpha,
        lambda: config.lambda,
        config: config.clone(),
        risk: Some(risk),
        redundancy_per_n: Some(redundancy),
        resolvability: Some(resolvability),
        risk_margin: Some(risk_margin),
        resolvability_margin: Some(resolvability_margin),
        witness: worst.map(|(_, i)| representative(&types[i].0)),
        trials: None,
        seed: None,
        tail: vec![],
        passed: risk_margin >= -CHAIN_TOL && resolvability_margin >= -CHAIN_TOL,
    })
}

/// Monte Carlo frequency of `d̄_λ(p*‖p̈) > (1/n) log(p*/p_2p) + b` under the
/// combined code, against `exp(−n b/α)`.
pub fn verify_theorem2(
    family: &FamilyRef,
    theta_star: &[f64],
    n: u64,
    bs: &[f64],
    trials: u64,
    seed: u64,
    config: &CodeConfig,
) -> Result<RiskCertificate> {
    config.check_lambda()?;
    let cb = Codebook::build(family.clone(), n, config)?;
    verify_theorem2_with(&cb, theta_star, bs, trials, seed)
}

pub fn verify_theorem2_with(cb: &Codebook, theta_star: &[f64], bs: &[f64], trials: u64, seed: u64) -> Result<RiskCertificate> {
    let config = &cb.config;
    config.check_lambda()?;
    if trials < MIN_TRIALS {
        return Err(MdlError::precondition(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    let family = cb.family();
    let (p, lp) = star(family, theta_star)?;
    let pmf = FinitePmf::normalized(p.clone())?;
    let n = cb.n;
    let nf = n as f64;
    let m = family.alphabet_size();
    let samples: Vec<Counts> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let xs = pmf.sample(n as usize, &mut trial_rng(seed, t));
            Counts::from_symbols(&xs, m)
        })
        .collect::<Result<_>>()?;
    let unique: Vec<Counts> = samples.iter().cloned().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let evaluated: BTreeMap<Counts, (f64, f64)> = unique
        .into_par_iter()
        .map(|c| {
            let e = cb.encode(&c)?;
            let d = renyi_log(&p, &e.log_probs, config.lambda)?;
            let red = (e.total + log_prob(&c, &lp)) / nf;
            Ok((c, (d, red)))
        })
        .collect::<Result<_>>()?;
    let tail: Vec<TailRow> = bs
        .iter()
        .map(|&b| {
            let violations = samples
                .iter()
                .filter(|c| {
                    let (d, red) = evaluated[*c];
                    d > red + b
                })
                .count() as u64;
            let frequency = violations as f64 / trials as f64;
            let bound = (-nf * b / config.alpha).exp();
            let f = frequency.max(bound);
            let sigma = (f * (1.0 - f) / trials as f64).sqrt();
            TailRow {
                b,
                violations,
                frequency,
                bound,
                sigma,
                passed: frequency <= bound + 3.0 * sigma,
            }
        })
        .collect();
    Ok(RiskCertificate {
        check: "theorem2".into(),
        family: family.name(),
        theta_star: theta_star.to_vec(),
        n,
        alpha: config.alpha,
        lambda: config.lambda,
        config: config.clone(),
        risk: None,
        redundancy_per_n: None,
        resolvability: None,
        risk_margin: None,
        resolvability_margin: None,
        witness: None,
        trials: Some(trials),
        seed: Some(seed),
        passed: tail.iter().all(|r| r.passed),
        tail,
    })
}
