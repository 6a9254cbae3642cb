//! Local exponential tilts `p̄_{θ,ξ}(x) = p_θ(x) exp(ξ·V(θ;x) − ψ_θ(ξ))`
//! and the finite tilting grid used by the two-part code.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{MdlError, Result};
use crate::linalg::{self, Matrix};
use crate::models::family::{Family, SymbolTable};
use crate::models::mle::mle_counts;
use crate::models::pmf::Counts;
use crate::models::space::BOUNDARY_TOL;
use crate::quantizer::QuantizedGrid;

/// Safety factor applied to the scanned second-moment bound.
pub const B_SAFETY: f64 = 1.01;
/// γ is calibrated to this fraction of the smallest observed V-ratio.
pub const GAMMA_SAFETY: f64 = 0.99;

/// `Ξ_n = {0} ∪ {±u_n E^{(l,m)}}`, indexed as 0 for the zero matrix,
/// `1 + 2(lK + m)` for `+u_n E^{(l,m)}` and `2 + 2(lK + m)` for its negative.
#[derive(Debug, Clone, Serialize)]
pub struct TiltingGrid {
    pub k: usize,
    pub n: u64,
    pub g: f64,
    pub gamma: f64,
    pub b: f64,
    pub nu: f64,
    pub delta_n: f64,
    pub u_n: f64,
    /// Code length of the zero tilt, `n^{-ν}`.
    pub l2: f64,
    /// Code length of every nonzero tilt.
    pub l2_bar: f64,
}

impl TiltingGrid {
    pub fn new(k: usize, n: u64, g: f64, gamma: f64, b: f64, nu: f64) -> Result<Self> {
        if n < 2 {
            return Err(MdlError::config(format!("tilting grid needs n >= 2, got {n}")));
        }
        if !(g > 0.0 && b > 0.0 && nu > 0.0 && gamma > 0.0 && gamma < 1.0) {
            return Err(MdlError::config(format!(
                "tilting grid needs g > 0, B > 0, nu > 0 and 0 < gamma < 1 (g = {g}, B = {b}, nu = {nu}, gamma = {gamma})"
            )));
        }
        let nf = n as f64;
        let delta_n = (g * nf.ln() / nf).sqrt();
        let u_n = gamma * delta_n / b;
        let l2 = nf.powf(-nu);
        let l2_bar = if k == 0 {
            f64::INFINITY
        } else {
            -(-(-l2).exp_m1()).ln() + (2.0 * (k * k) as f64).ln()
        };
        Ok(TiltingGrid {
            k,
            n,
            g,
            gamma,
            b,
            nu,
            delta_n,
            u_n,
            l2,
            l2_bar,
        })
    }

    /// Checks `γg/(2B) − να > 0`.
    pub fn check_rate(&self, alpha: f64) -> Result<()> {
        let lhs = self.gamma * self.g / (2.0 * self.b);
        if lhs - self.nu * alpha > 0.0 {
            Ok(())
        } else {
            Err(MdlError::config(format!(
                "gamma g / (2B) - nu alpha > 0 fails: {lhs} - {} <= 0",
                self.nu * alpha
            )))
        }
    }

    pub fn len(&self) -> usize {
        2 * self.k * self.k + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(l, m, sign)` of a nonzero tilt.
    pub fn entry(&self, idx: usize) -> Option<(usize, usize, f64)> {
        if idx == 0 {
            return None;
        }
        let e = (idx - 1) / 2;
        let sign = if (idx - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
        Some((e / self.k, e % self.k, sign))
    }

    pub fn index_of(&self, l: usize, m: usize, sign: f64) -> usize {
        1 + 2 * (l * self.k + m) + usize::from(sign < 0.0)
    }

    pub fn xi(&self, idx: usize) -> Matrix {
        let mut x = Matrix::zeros(self.k, self.k);
        if let Some((l, m, s)) = self.entry(idx) {
            x[(l, m)] = s * self.u_n;
        }
        x
    }

    /// `L̃_n(ξ)` in nats.
    pub fn code_length(&self, idx: usize) -> f64 {
        if idx == 0 {
            if self.k == 0 {
                0.0
            } else {
                self.l2
            }
        } else {
            self.l2_bar
        }
    }

    /// `Σ_ξ exp(−L̃_n(ξ))`; one by construction.
    pub fn kraft_sum(&self) -> f64 {
        (0..self.len()).map(|i| (-self.code_length(i)).exp()).sum()
    }
}

/// `ξ·V(θ; x)` for every symbol.
fn tilt_exponents(table: &SymbolTable, xi: &Matrix) -> Vec<f64> {
    table.v.iter().map(|v| linalg::frobenius_dot(xi, v)).collect()
}

/// `ψ_θ(ξ) = log Σ_x p_θ(x) exp(ξ·V(θ;x))` from a symbol table.
pub fn log_normalizer_table(table: &SymbolTable, xi: &Matrix) -> Result<f64> {
    if xi.iter().all(|v| *v == 0.0) {
        // Σ_x p_θ(x) = 1 by definition; summing would only add rounding
        return Ok(0.0);
    }
    let e = tilt_exponents(table, xi);
    let psi = linalg::log_sum_exp(
        table
            .log_probs
            .iter()
            .zip(&e)
            .filter(|(lp, _)| lp.is_finite())
            .map(|(lp, t)| lp + t),
    );
    if !psi.is_finite() {
        return Err(MdlError::Numeric {
            symbol: 0,
            what: format!("log normalizer overflowed at theta = {:?}", table.theta),
        });
    }
    Ok(psi)
}

pub fn log_normalizer(family: &dyn Family, theta: &[f64], xi: &Matrix) -> Result<f64> {
    family.space().check(theta)?;
    log_normalizer_table(&SymbolTable::new(family, theta)?, xi)
}

/// `log p̄_{θ,ξ}(x)` for every symbol.
pub fn tilted_log_probs(table: &SymbolTable, xi: &Matrix) -> Result<Vec<f64>> {
    let psi = log_normalizer_table(table, xi)?;
    let e = tilt_exponents(table, xi);
    Ok(table
        .log_probs
        .iter()
        .zip(&e)
        .map(|(lp, t)| if lp.is_finite() { lp + t - psi } else { f64::NEG_INFINITY })
        .collect())
}

/// `log p_θ(x^n) + n(ξ·V(θ;x^n) − ψ_θ(ξ))`.
pub fn tilted_log_likelihood_counts(table: &SymbolTable, xi: &Matrix, counts: &Counts) -> Result<f64> {
    let lp = tilted_log_probs(table, xi)?;
    Ok(counts.support().map(|(x, c)| c as f64 * lp[x]).sum())
}

pub fn tilted_log_likelihood(
    family: &dyn Family,
    theta: &[f64],
    xi: &Matrix,
    xs: &[usize],
) -> Result<f64> {
    family.space().check(theta)?;
    let counts = Counts::from_symbols(xs, family.alphabet_size())?;
    tilted_log_likelihood_counts(&SymbolTable::new(family, theta)?, xi, &counts)
}

/// The tilt achieving `ξ·V = u_n ‖V‖_M`: the sign-matched single entry at
/// the largest-magnitude position, first in row-major order on ties; the
/// zero tilt when `V = 0`.
pub fn select_xi(v: &Matrix, grid: &TiltingGrid) -> usize {
    let k = grid.k;
    let mut best = (0.0, None);
    for l in 0..k {
        for m in 0..k {
            let a = v[(l, m)].abs();
            if a > best.0 {
                best = (a, Some((l, m)));
            }
        }
    }
    match best.1 {
        None => 0,
        Some((l, m)) => grid.index_of(l, m, v[(l, m)]),
    }
}

/// `g(θ, ξ; x^n) = ξ·V(θ;x^n) − ψ_θ(ξ)`.
pub fn g_function_counts(table: &SymbolTable, xi: &Matrix, counts: &Counts) -> Result<f64> {
    if counts.n() == 0 {
        return Err(MdlError::precondition("g needs n >= 1"));
    }
    let v = table.v_statistic(counts);
    Ok(linalg::frobenius_dot(xi, &v) - log_normalizer_table(table, xi)?)
}

pub fn g_function(family: &dyn Family, theta: &[f64], xi: &Matrix, xs: &[usize]) -> Result<f64> {
    family.space().check(theta)?;
    let counts = Counts::from_symbols(xs, family.alphabet_size())?;
    g_function_counts(&SymbolTable::new(family, theta)?, xi, &counts)
}

/// The g-value at the quantized point with the selected tilt, against the
/// lower bound `u_n ‖V(θ̈)‖_M (1 − B u_n/(2γδ_n))`.
#[derive(Debug, Clone, Serialize)]
pub struct GMargin {
    pub xi_index: usize,
    pub g: f64,
    pub lower_bound: f64,
    pub margin: f64,
    pub v_norm: f64,
}

pub fn g_margin(table: &SymbolTable, counts: &Counts, grid: &TiltingGrid) -> Result<GMargin> {
    let v = table.v_statistic(counts);
    let xi_index = select_xi(&v, grid);
    let g = g_function_counts(table, &grid.xi(xi_index), counts)?;
    let v_norm = linalg::max_norm(&v);
    let lower_bound =
        grid.u_n * v_norm * (1.0 - grid.b * grid.u_n / (2.0 * grid.gamma * grid.delta_n));
    Ok(GMargin {
        xi_index,
        g,
        lower_bound,
        margin: g - lower_bound,
        v_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceClass {
    /// Interior MLE with `‖V(θ̂)‖_M ≤ δ_n`.
    Good,
    /// Interior MLE with `‖V(θ̂)‖_M > δ_n`.
    Bad,
    Boundary,
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub class: SequenceClass,
    pub theta_hat: Vec<f64>,
    pub v_norm: f64,
    pub delta_n: f64,
}

pub fn classify_counts(family: &dyn Family, counts: &Counts, delta_n: f64) -> Result<Classification> {
    let fit = mle_counts(family, counts)?;
    let space = family.space();
    if !space.is_interior(&fit.theta, BOUNDARY_TOL) {
        return Ok(Classification {
            class: SequenceClass::Boundary,
            theta_hat: fit.theta,
            v_norm: f64::NAN,
            delta_n,
        });
    }
    let table = SymbolTable::new(family, &fit.theta)?;
    let v_norm = linalg::max_norm(&table.v_statistic(counts));
    let class = if v_norm <= delta_n {
        SequenceClass::Good
    } else {
        SequenceClass::Bad
    };
    Ok(Classification {
        class,
        theta_hat: fit.theta,
        v_norm,
        delta_n,
    })
}

pub fn classify_sequence(family: &dyn Family, xs: &[usize], delta_n: f64) -> Result<Classification> {
    classify_counts(family, &Counts::from_symbols(xs, family.alphabet_size())?, delta_n)
}

/// `|E_{p̄_{θ,ξ}}[V_ij V_kl]|` maximized over all index quadruples.
pub fn second_moment(table: &SymbolTable, xi: &Matrix) -> Result<f64> {
    let lp = tilted_log_probs(table, xi)?;
    let k = table.fisher.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            for a in 0..k {
                for b in 0..k {
                    let s: f64 = lp
                        .iter()
                        .zip(&table.v)
                        .filter(|(l, _)| l.is_finite())
                        .map(|(l, v)| l.exp() * v[(i, j)] * v[(a, b)])
                        .sum();
                    worst = worst.max(s.abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Certified tilt constants: the radius `δ̄`, the second-moment bound `B`
/// over `θ` scan points and single-entry tilts with `|t| ≤ δ̄`, and the
/// untilted maximum `B_0`.
#[derive(Debug, Clone, Serialize)]
pub struct TiltConstants {
    pub b0: f64,
    pub delta_bar: f64,
    pub b: f64,
    pub theta_points: usize,
    pub tilt_levels: usize,
}

/// `δ̄ = sqrt(4να/(e B_0))` bounds `u_n = sqrt(4ναγ log n/(B n))` for every
/// `n ≥ 2` and `γ < 1`, since `log n / n ≤ 1/e` and `B ≥ B_0`.
pub fn calibrate_tilt(
    family: &dyn Family,
    nu: f64,
    alpha: f64,
    resolution: usize,
    extra_points: &[Vec<f64>],
) -> Result<TiltConstants> {
    let k = family.dim();
    if k == 0 {
        return Err(MdlError::precondition("tilts need K >= 1"));
    }
    let mut points = family.space().grid(resolution);
    points.extend(extra_points.iter().cloned());
    let tables: Vec<SymbolTable> = points
        .par_iter()
        .map(|t| SymbolTable::new(family, t))
        .collect::<Result<Vec<_>>>()?;
    let zero = Matrix::zeros(k, k);
    let b0 = tables
        .par_iter()
        .map(|t| second_moment(t, &zero))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    if !(b0 > 0.0) {
        return Err(MdlError::Unsupported(
            "V vanishes identically; the family needs no tilts".into(),
        ));
    }
    let delta_bar = (4.0 * nu * alpha / (std::f64::consts::E * b0)).sqrt();
    let levels = 10usize;
    let tilts: Vec<Matrix> = (0..k * k)
        .flat_map(|e| {
            (1..=levels).flat_map(move |s| {
                [1.0, -1.0].into_iter().map(move |sign| {
                    let mut x = Matrix::zeros(k, k);
                    x[(e / k, e % k)] = sign * delta_bar * s as f64 / levels as f64;
                    x
                })
            })
        })
        .collect();
    let b = tables
        .par_iter()
        .map(|t| {
            tilts
                .iter()
                .map(|x| second_moment(t, x))
                .try_fold(0.0_f64, |acc, v| v.map(|v| acc.max(v)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(b0, f64::max);
    Ok(TiltConstants {
        b0,
        delta_bar,
        b: B_SAFETY * b,
        theta_points: points.len(),
        tilt_levels: levels,
    })
}

/// `g = 4ναB/γ`, so that `γg/(2B) = 2να`.
pub fn default_g(nu: f64, alpha: f64, b: f64, gamma: f64) -> f64 {
    4.0 * nu * alpha * b / gamma
}

/// Per-type inputs of the γ calibration: `‖V(θ̂)‖_M` and the smallest ratio
/// `‖V(θ)‖_M / ‖V(θ̂)‖_M` over the Δ-ball around θ̂.
#[derive(Debug, Clone, Serialize)]
pub struct VRatio {
    pub counts: Vec<u64>,
    pub v_norm: f64,
    pub min_ratio: f64,
}

/// Computes [`VRatio`] for every interior type with `V(θ̂) ≠ 0`. The ball
/// is sampled on a tensor grid with `per_axis` points per coordinate, plus
/// the quantized point θ̈ when a grid is supplied.
pub fn v_ratios(
    family: &dyn Family,
    types: &[Counts],
    delta_ball: f64,
    per_axis: usize,
    grid: Option<&QuantizedGrid>,
) -> Result<Vec<VRatio>> {
    let space = family.space();
    let k = family.dim();
    let out: Vec<Option<VRatio>> = types
        .par_iter()
        .map(|c| {
            let fit = mle_counts(family, c)?;
            if !space.is_interior(&fit.theta, BOUNDARY_TOL) {
                return Ok(None);
            }
            let v_norm = linalg::max_norm(&SymbolTable::new(family, &fit.theta)?.v_statistic(c));
            if v_norm == 0.0 {
                return Ok(None);
            }
            let mut ball = ball_points(&fit.theta, delta_ball, per_axis.max(2), k);
            ball.retain(|t| space.contains(t, 0.0));
            if let Some(g) = grid {
                let near = g.nearest_point(&fit.theta)?;
                if linalg::euclid(&near.point, &fit.theta) <= delta_ball {
                    ball.push(near.point);
                }
            }
            let mut min_ratio = f64::INFINITY;
            for t in &ball {
                let r = linalg::max_norm(&SymbolTable::new(family, t)?.v_statistic(c)) / v_norm;
                min_ratio = min_ratio.min(r);
            }
            Ok(Some(VRatio {
                counts: c.as_slice().to_vec(),
                v_norm,
                min_ratio,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(out.into_iter().flatten().collect())
}

fn ball_points(center: &[f64], radius: f64, per_axis: usize, k: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; k];
    loop {
        let t: Vec<f64> = (0..k)
            .map(|i| center[i] - radius + 2.0 * radius * idx[i] as f64 / (per_axis - 1) as f64)
            .collect();
        if linalg::euclid(&t, center) <= radius {
            out.push(t);
        }
        let mut i = 0;
        loop {
            if i == k {
                return out;
            }
            idx[i] += 1;
            if idx[i] < per_axis {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Largest γ with `γ ≤ 0.99 · min ratio` over the types that fall outside
/// `𝓖_n` at that γ (where `δ_n` uses `g = 4ναB/γ`), found by bisection.
/// Returns the calibrated γ, which is below one.
pub fn calibrate_gamma(ratios: &[VRatio], n: u64, nu: f64, alpha: f64, b: f64) -> f64 {
    let nf = n as f64;
    let cap = |gamma: f64| -> f64 {
        let delta = (default_g(nu, alpha, b, gamma) * nf.ln() / nf).sqrt();
        let m = ratios
            .iter()
            .filter(|r| r.v_norm > delta)
            .map(|r| r.min_ratio)
            .fold(f64::INFINITY, f64::min);
        if m.is_finite() {
            (GAMMA_SAFETY * m).min(GAMMA_SAFETY)
        } else {
            GAMMA_SAFETY
        }
    };
    if cap(GAMMA_SAFETY) >= GAMMA_SAFETY {
        return GAMMA_SAFETY;
    }
    // γ − cap(γ) is increasing in γ: shrinking γ raises δ_n and can only
    // remove types from the constraint set
    let (mut lo, mut hi) = (0.0_f64, GAMMA_SAFETY);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= cap(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    lo
}
