//! Upper bound on `log |Θ̈_n|` and the Fisher volume `∫_Θ |J|^{1/2}`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{MdlError, Result};
use crate::linalg;
use crate::models::certify::AssumptionConstants;
use crate::models::family::{ConstantFisher, FisherGeometry};
use crate::models::space::ParamSpace;

/// Gauss–Legendre order of each quadrature panel.
const GL_ORDER: usize = 8;

/// Geometry-dependent constants of the cardinality bound; everything that
/// does not depend on `n`, `a` or `β`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundConstants {
    pub k: usize,
    /// Largest coordinate extent of Θ.
    pub w_theta: f64,
    pub lambda_bar: f64,
    /// Λ = max |J|.
    pub det_max: f64,
    pub d_j: f64,
    pub min_sqrt_det: f64,
    /// `∫_Θ |J|^{1/2} dθ`.
    pub integral: f64,
    /// Difference between the quadrature and its half-resolution rerun.
    pub integral_tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CardinalityBound {
    pub n: u64,
    pub a: f64,
    pub beta: f64,
    /// Bound on `log |Θ̈_n|` in nats.
    pub log_bound: f64,
    /// `exp(log_bound)`.
    pub count_bound: f64,
    pub r: f64,
    pub c_j: f64,
    pub c_theta: f64,
    pub c_k: f64,
    pub c_jk: f64,
    pub lambda: f64,
    pub integral: f64,
    pub integral_tol: f64,
}

impl BoundConstants {
    /// Constants of a family from its certified assumptions.
    pub fn from_certified<G: FisherGeometry + ?Sized>(geom: &G, c: &AssumptionConstants) -> Result<Self> {
        let space = geom.geometry_space();
        let (integral, integral_tol) = fisher_volume(geom, default_panels(space.dim()))?;
        Ok(BoundConstants {
            k: space.dim(),
            w_theta: space.width(),
            lambda_bar: c.lambda_bar,
            det_max: c.det_max,
            d_j: c.d_j,
            min_sqrt_det: c.det_min.max(0.0).sqrt(),
            integral,
            integral_tol,
        })
    }

    /// Exact constants of a constant metric: `D_J = 0` and `|J|` is flat.
    pub fn constant(geom: &ConstantFisher) -> Result<Self> {
        let det = linalg::det(&geom.matrix);
        let (integral, integral_tol) = fisher_volume(geom, default_panels(geom.space.dim()))?;
        Ok(BoundConstants {
            k: geom.space.dim(),
            w_theta: geom.space.width(),
            lambda_bar: linalg::max_eigenvalue(&geom.matrix),
            det_max: det,
            d_j: 0.0,
            min_sqrt_det: det.sqrt(),
            integral,
            integral_tol,
        })
    }
}

/// Evaluates the bound
/// `(K/2) log n + log ∫|J|^{1/2} − K log a + r(n)`.
pub fn cardinality_bound(c: &BoundConstants, n: u64, a: f64, beta: f64) -> Result<CardinalityBound> {
    if n == 0 || !(a > 0.0) || !(beta > 0.0 && beta < 0.5) {
        return Err(MdlError::config(format!(
            "cardinality bound needs n >= 1, a > 0, 0 < beta < 1/2 (n = {n}, a = {a}, beta = {beta})"
        )));
    }
    if !(c.integral > 0.0 && c.min_sqrt_det > 0.0) {
        return Err(MdlError::Numeric {
            symbol: 0,
            what: "Fisher volume is not positive".into(),
        });
    }
    let k = c.k as f64;
    let nf = n as f64;
    let sqrt_lambda = c.det_max.sqrt();
    let c_j = 2.0 * k * (c.lambda_bar.sqrt() + 2.0).powf(k - 1.0) * sqrt_lambda;
    let c_theta = k * a * c.d_j / c.min_sqrt_det;
    let c_k = 2f64.powf(k) * (c.w_theta + 2.0 * a).powf(k - 1.0);
    let c_jk = c_k * sqrt_lambda * a / c.integral;
    let r = (1.0 + c_j * nf.powf(-(0.5 - beta))).ln()
        + (1.0 + c_theta * nf.powf(-beta)).ln()
        + (1.0 + c_jk * nf.powf(-beta)).ln();
    let log_bound = 0.5 * k * nf.ln() + c.integral.ln() - k * a.ln() + r;
    Ok(CardinalityBound {
        n,
        a,
        beta,
        log_bound,
        count_bound: log_bound.exp(),
        r,
        c_j,
        c_theta,
        c_k,
        c_jk,
        lambda: c.det_max,
        integral: c.integral,
        integral_tol: c.integral_tol,
    })
}

/// Panels per axis: 125 eight-point panels (10³ nodes) for K ≤ 2, fewer in
/// higher dimension to keep the tensor grid tractable.
pub fn default_panels(k: usize) -> usize {
    match k {
        0..=2 => 125,
        3 => 20,
        _ => 6,
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; order];
    let mut ws = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=order {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let p = if order == 0 { 1.0 } else { p1 };
            dp = nf * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        xs[order - 1 - i] = x;
        ws[i] = w;
        ws[order - 1 - i] = w;
    }
    (xs, ws)
}

/// Composite rule on [lo, hi] with `panels` panels.
fn composite(lo: f64, hi: f64, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> Vec<(f64, f64)> {
    let h = (hi - lo) / panels as f64;
    let mut out = Vec::with_capacity(panels * rule.0.len());
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * h;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

fn integrate<G: FisherGeometry + ?Sized>(geom: &G, panels: usize) -> Result<f64> {
    let space = geom.geometry_space();
    let k = space.dim();
    if k == 0 {
        return Ok(1.0);
    }
    let rule = gauss_legendre(GL_ORDER);
    let sqrt_det = |t: &[f64]| -> Result<f64> { Ok(linalg::det(&geom.metric(t)?).max(0.0).sqrt()) };
    match space {
        ParamSpace::Box { lo, hi } => {
            let axes: Vec<Vec<(f64, f64)>> = (0..k)
                .map(|i| composite(lo[i], hi[i], panels, &rule))
                .collect();
            // parallel over the first axis, sequential (ordered) inside
            let parts: Vec<f64> = axes[0]
                .par_iter()
                .map(|&(x0, w0)| {
                    let mut acc = 0.0;
                    let mut t = vec![0.0; k];
                    t[0] = x0;
                    tensor(&axes, 1, &mut t, w0, &mut |t, w| {
                        acc += w * sqrt_det(t)?;
                        Ok(())
                    })?;
                    Ok(acc)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(parts.iter().sum())
        }
        ParamSpace::TauSimplex { tau, .. } => {
            let tau = *tau;
            let top = 1.0 - k as f64 * tau;
            let first = composite(tau, top, panels, &rule);
            let parts: Vec<f64> = first
                .par_iter()
                .map(|&(x0, w0)| {
                    let mut t = vec![0.0; k];
                    t[0] = x0;
                    simplex_nested(k, tau, 1, &mut t, w0, panels, &rule, &sqrt_det)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(parts.iter().sum())
        }
    }
}

fn tensor(
    axes: &[Vec<(f64, f64)>],
    depth: usize,
    t: &mut Vec<f64>,
    w: f64,
    f: &mut impl FnMut(&[f64], f64) -> Result<()>,
) -> Result<()> {
    if depth == axes.len() {
        return f(t, w);
    }
    for &(x, wx) in &axes[depth] {
        t[depth] = x;
        tensor(axes, depth + 1, t, w * wx, f)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simplex_nested(
    k: usize,
    tau: f64,
    depth: usize,
    t: &mut Vec<f64>,
    w: f64,
    panels: usize,
    rule: &(Vec<f64>, Vec<f64>),
    sqrt_det: &impl Fn(&[f64]) -> Result<f64>,
) -> Result<f64> {
    if depth == k {
        return Ok(w * sqrt_det(t)?);
    }
    let used: f64 = t[..depth].iter().sum();
    let hi = 1.0 - tau - used - (k - depth - 1) as f64 * tau;
    if hi <= tau {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for (x, wx) in composite(tau, hi, panels, rule) {
        t[depth] = x;
        acc += simplex_nested(k, tau, depth + 1, t, w * wx, panels, rule, sqrt_det)?;
    }
    Ok(acc)
}

/// `∫_Θ |J|^{1/2} dθ` by composite Gauss–Legendre with `panels` panels per
/// axis; the tolerance is the change against half as many panels.
pub fn fisher_volume<G: FisherGeometry + ?Sized>(geom: &G, panels: usize) -> Result<(f64, f64)> {
    let panels = panels.max(2);
    let full = integrate(geom, panels)?;
    let half = integrate(geom, panels / 2)?;
    if !full.is_finite() || full <= 0.0 {
        return Err(MdlError::Numeric {
            symbol: 0,
            what: format!("Fisher volume quadrature returned {full}"),
        });
    }
    Ok((full, (full - half).abs()))
}
