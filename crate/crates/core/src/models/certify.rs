//! Numeric certification of the regularity constants a family needs:
//! closed forms where the family states them, grid scans otherwise.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MdlError, Result};
use crate::linalg;
use crate::models::family::{fisher_unchecked, Family};

pub const DEFAULT_RESOLUTION: usize = 200;
/// Cap on the number of scan points, whatever the dimension.
pub const MAX_SCAN_POINTS: usize = 200_000;
pub const ZETA_SAFETY: f64 = 0.99;
pub const UPPER_SAFETY: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    GridCertified,
    Uncertified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionConstants {
    pub zeta: f64,
    pub lambda_bar: f64,
    pub kappa: f64,
    pub b_bar: f64,
    pub kappa_prime: f64,
    pub b_bar_prime: f64,
    pub epsilon: f64,
    pub c_epsilon: f64,
    /// Radius Δ of the ball in the V-ratio assumption.
    pub delta_ball: f64,
    pub gamma: Option<f64>,
    pub delta_bar: Option<f64>,
    pub b_tilt: Option<f64>,
    pub d_j: f64,
    /// Λ = max |J|.
    pub det_max: f64,
    pub det_min: f64,
    /// Codimension deficit of the boundary code.
    pub d_boundary: f64,
    /// Uniform bound on `‖V(θ; x)‖_M`, when known.
    pub v_bound: Option<f64>,
    /// Per-symbol scan maximum of `‖V(θ; x)‖_M`.
    pub v_scan_max: f64,
    pub resolution: usize,
    pub provenance: BTreeMap<String, Provenance>,
}

impl AssumptionConstants {
    /// `C_ε` at another radius, when the family gives it in closed form.
    pub fn c_epsilon_at(&self, family: &dyn Family, eps: f64) -> f64 {
        match family.analytic_constants() {
            Some(c) => (c.c_epsilon_rate * eps).exp(),
            None => self.c_epsilon,
        }
    }
}

struct ScanPoint {
    min_eig: f64,
    max_eig: f64,
    det: f64,
    grad_sqrt_det: f64,
    v_max: f64,
}

fn scan_points(family: &dyn Family, resolution: usize) -> Vec<Vec<f64>> {
    let k = family.dim().max(1) as u32;
    let mut res = resolution.max(2);
    while res > 2 && (res as f64).powi(k as i32) > MAX_SCAN_POINTS as f64 {
        res -= 1;
    }
    family.space().grid(res)
}

fn scan_one(family: &dyn Family, theta: &[f64], h: f64) -> ScanPoint {
    let space = family.space();
    let j = fisher_unchecked(family, theta);
    let eig = linalg::sym_eigen(&j);
    let det = linalg::det(&j).max(0.0);
    let sqrt_det = |t: &[f64]| linalg::det(&fisher_unchecked(family, t)).max(0.0).sqrt();
    let k = theta.len();
    let mut g2 = 0.0;
    for i in 0..k {
        let mut tp = theta.to_vec();
        let mut tm = theta.to_vec();
        tp[i] += h;
        tm[i] -= h;
        let (tp, tm) = (space.project(&tp), space.project(&tm));
        let d = tp[i] - tm[i];
        if d > 0.0 {
            let gi = (sqrt_det(&tp) - sqrt_det(&tm)) / d;
            g2 += gi * gi;
        }
    }
    let w = linalg::sym_inv_sqrt(&j);
    let id = linalg::Matrix::identity(k, k);
    let v_max = (0..family.alphabet_size())
        .filter(|&x| family.prob(theta, x) > 0.0)
        .map(|x| linalg::max_norm(&(&w * family.symbol_fisher(theta, x) * &w - &id)))
        .fold(0.0, f64::max);
    ScanPoint {
        min_eig: eig.values.first().copied().unwrap_or(f64::INFINITY),
        max_eig: eig.values.last().copied().unwrap_or(0.0),
        det,
        grad_sqrt_det: g2.sqrt(),
        v_max,
    }
}

/// Certifies the regularity constants of `family` by scanning a tensor
/// grid with `resolution` points per axis.
pub fn certify_assumptions(family: &dyn Family, resolution: usize) -> Result<AssumptionConstants> {
    let k = family.dim();
    if k == 0 {
        return Err(MdlError::precondition("nothing to certify for a zero-dimensional family"));
    }
    let points = scan_points(family, resolution);
    let h = 1e-6 * family.space().width().max(1e-3);
    let scans: Vec<ScanPoint> = points
        .par_iter()
        .map(|t| scan_one(family, t, h))
        .collect();
    // ordered reductions keep the result schedule-independent
    let min_eig = scans.iter().map(|s| s.min_eig).fold(f64::INFINITY, f64::min);
    let max_eig = scans.iter().map(|s| s.max_eig).fold(0.0, f64::max);
    let det_max = scans.iter().map(|s| s.det).fold(0.0, f64::max);
    let det_min = scans.iter().map(|s| s.det).fold(f64::INFINITY, f64::min);
    let d_j = scans.iter().map(|s| s.grad_sqrt_det).fold(0.0, f64::max);
    let v_scan_max = scans.iter().map(|s| s.v_max).fold(0.0, f64::max);
    if !(min_eig > 0.0) {
        return Err(MdlError::Degenerate {
            theta: points[scans
                .iter()
                .position(|s| !(s.min_eig > 0.0))
                .unwrap_or(0)]
            .clone(),
            min_eigenvalue: min_eig,
        });
    }
    let zeta = ZETA_SAFETY * min_eig;
    let mut provenance = BTreeMap::new();
    provenance.insert("zeta".to_string(), Provenance::GridCertified);
    provenance.insert("d_j".to_string(), Provenance::GridCertified);
    provenance.insert("det_max".to_string(), Provenance::GridCertified);

    let constants = match family.analytic_constants() {
        Some(a) => {
            for name in ["lambda_bar", "kappa", "b_bar", "kappa_prime", "b_bar_prime", "c_epsilon"] {
                provenance.insert(name.to_string(), Provenance::ClosedForm);
            }
            let mixture = family.as_mixture();
            let det_max = match mixture {
                // Λ ≤ λ̄^K holds exactly for mixtures
                Some(_) => (UPPER_SAFETY * det_max).min(a.lambda_bar.powi(k as i32)),
                None => UPPER_SAFETY * det_max,
            };
            let v_bound = mixture.map(|m| {
                let kf = k as f64;
                kf * kf.sqrt() / (zeta * m.tau() * m.tau()) + 1.0
            });
            if v_bound.is_some() {
                provenance.insert("v_bound".to_string(), Provenance::ClosedForm);
            }
            let epsilon = a.b_bar;
            AssumptionConstants {
                zeta,
                lambda_bar: a.lambda_bar.max(max_eig),
                kappa: a.kappa,
                b_bar: a.b_bar,
                kappa_prime: a.kappa_prime,
                b_bar_prime: a.b_bar_prime,
                epsilon,
                c_epsilon: (a.c_epsilon_rate * epsilon).exp(),
                delta_ball: epsilon,
                gamma: None,
                delta_bar: None,
                b_tilt: None,
                d_j: UPPER_SAFETY * d_j,
                det_max,
                det_min,
                d_boundary: 1.0,
                v_bound,
                v_scan_max,
                resolution,
                provenance,
            }
        }
        None => {
            // empirical Lipschitz constant of log zᵀJz between neighbouring
            // scan points
            let b_bar = family.space().width() / (resolution.max(2) - 1) as f64 * 2.0;
            let kappa = estimate_kappa(family, &points, b_bar);
            for name in ["lambda_bar", "kappa", "b_bar", "kappa_prime", "b_bar_prime", "c_epsilon"] {
                provenance.insert(name.to_string(), Provenance::Uncertified);
            }
            AssumptionConstants {
                zeta,
                lambda_bar: UPPER_SAFETY * max_eig,
                kappa,
                b_bar,
                kappa_prime: kappa,
                b_bar_prime: b_bar,
                epsilon: b_bar,
                c_epsilon: (kappa * b_bar).exp(),
                delta_ball: b_bar,
                gamma: None,
                delta_bar: None,
                b_tilt: None,
                d_j: UPPER_SAFETY * d_j,
                det_max: UPPER_SAFETY * det_max,
                det_min,
                d_boundary: 1.0,
                v_bound: None,
                v_scan_max,
                resolution,
                provenance,
            }
        }
    };
    Ok(constants)
}

fn estimate_kappa(family: &dyn Family, points: &[Vec<f64>], radius: f64) -> f64 {
    let js: Vec<linalg::Matrix> = points.iter().map(|t| fisher_unchecked(family, t)).collect();
    let worst = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut w: f64 = 0.0;
            for j in 0..points.len() {
                let d = linalg::euclid(&points[i], &points[j]);
                if i != j && d <= radius {
                    let r = linalg::max_generalized_eigenvalue(&js[i], &js[j]);
                    w = w.max((r - 1.0) / d);
                }
            }
            w
        })
        .collect::<Vec<_>>();
    UPPER_SAFETY * worst.into_iter().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::mixture::Mixture;

    #[test]
    fn mixture_closed_forms() {
        let m = Mixture::from_probs(vec![vec![0.9, 0.1], vec![0.2, 0.8]], 0.2).unwrap();
        let c = certify_assumptions(&m, 50).unwrap();
        assert!((c.lambda_bar - 25.0).abs() < 1e-12);
        assert!((c.kappa - 27.18).abs() < 5e-3);
        assert!((c.c_epsilon_at(&m, 0.05) - 1.6487).abs() < 5e-5);
        assert!(c.zeta > 0.0 && c.zeta <= c.lambda_bar);
        assert_eq!(c.provenance["kappa"], Provenance::ClosedForm);
        assert!(c.v_scan_max <= c.v_bound.unwrap());
    }
}
