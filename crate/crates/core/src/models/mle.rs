use serde::{Deserialize, Serialize};

use crate::error::{MdlError, Result};
use crate::linalg::Matrix;
use crate::models::family::{log_likelihood_counts, Family};
use crate::models::mixture::Mixture;
use crate::models::pmf::Counts;
use crate::models::space::{Face, BOUNDARY_TOL};

pub const EM_TOL: f64 = 1e-10;
pub const EM_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    pub theta: Vec<f64>,
    pub boundary: bool,
    pub active: Vec<Face>,
    pub loglik: f64,
}

/// Maximum-likelihood estimate restricted to the (compact) parameter space.
pub fn mle(family: &dyn Family, xs: &[usize]) -> Result<MleResult> {
    let counts = Counts::from_symbols(xs, family.alphabet_size())?;
    mle_counts(family, &counts)
}

pub fn mle_counts(family: &dyn Family, counts: &Counts) -> Result<MleResult> {
    if counts.n() == 0 {
        return Err(MdlError::precondition("the MLE needs at least one symbol"));
    }
    if counts.alphabet() != family.alphabet_size() {
        return Err(MdlError::precondition("counts do not match the alphabet"));
    }
    let theta = if family.dim() == 0 {
        vec![]
    } else if let Some(t) = family.mle_closed_form(counts) {
        t
    } else if let Some(mix) = family.as_mixture() {
        mixture_mle(mix, counts)?
    } else {
        projected_ascent(family, counts)?
    };
    Ok(finish(family, theta, counts))
}

fn finish(family: &dyn Family, theta: Vec<f64>, counts: &Counts) -> MleResult {
    let space = family.space();
    let active = space.active_set(&theta, BOUNDARY_TOL);
    MleResult {
        loglik: log_likelihood_counts(family, &theta, counts),
        boundary: !active.is_empty(),
        active,
        theta,
    }
}

/// Maximizes `Σ_i r_i log w_i` over `{w ≥ τ, Σ w = 1}`: `w_i = max(τ, r_i/μ)`.
pub fn water_fill(r: &[f64], tau: f64) -> Vec<f64> {
    let mut pinned = vec![false; r.len()];
    loop {
        let free_mass: f64 = r
            .iter()
            .zip(&pinned)
            .filter(|(_, p)| !**p)
            .map(|(v, _)| v)
            .sum();
        let n_pinned = pinned.iter().filter(|p| **p).count();
        let budget = 1.0 - tau * n_pinned as f64;
        let mu = free_mass / budget;
        let mut changed = false;
        for i in 0..r.len() {
            if !pinned[i] && (mu <= 0.0 || r[i] / mu < tau) {
                pinned[i] = true;
                changed = true;
            }
        }
        if !changed || pinned.iter().all(|p| *p) {
            if pinned.iter().all(|p| *p) {
                return vec![1.0 / r.len() as f64; r.len()];
            }
            return r
                .iter()
                .zip(&pinned)
                .map(|(v, p)| if *p { tau } else { v / mu })
                .collect();
        }
    }
}

struct MixtureObjective {
    comps: Vec<Vec<f64>>,
    support: Vec<(usize, f64)>,
}

impl MixtureObjective {
    fn density(&self, w: &[f64], x: usize) -> f64 {
        w.iter().zip(&self.comps).map(|(wi, q)| wi * q[x]).sum()
    }

    fn loglik(&self, w: &[f64]) -> f64 {
        self.support
            .iter()
            .map(|(x, c)| c * self.density(w, *x).ln())
            .sum()
    }

    /// `g_i = Σ_x N_x q_i(x) / p(x)`.
    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; w.len()];
        for (x, c) in &self.support {
            let p = self.density(w, *x);
            for (gi, q) in g.iter_mut().zip(&self.comps) {
                *gi += c * q[*x] / p;
            }
        }
        g
    }
}

fn mixture_mle(mix: &Mixture, counts: &Counts) -> Result<Vec<f64>> {
    let k = mix.k();
    let tau = mix.tau();
    let obj = MixtureObjective {
        comps: mix.components().iter().map(|q| q.probs().to_vec()).collect(),
        support: counts.support().map(|(x, c)| (x, c as f64)).collect(),
    };
    let n = counts.n() as f64;
    let mut w = vec![1.0 / (k as f64 + 1.0); k + 1];
    let mut ll = obj.loglik(&w);
    if !ll.is_finite() {
        let (x, _) = obj.support[0];
        return Err(MdlError::Numeric {
            symbol: x,
            what: "observed symbol has zero probability under every component".into(),
        });
    }
    let mut converged = false;
    for _ in 0..EM_MAX_ITER {
        let g = obj.gradient(&w);
        let r: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi * gi / n).collect();
        let next = water_fill(&r, tau);
        let next_ll = obj.loglik(&next);
        let gain = next_ll - ll;
        w = next;
        ll = next_ll;
        if gain < EM_TOL {
            converged = true;
            break;
        }
    }
    let polished = newton_polish(&obj, w.clone(), tau);
    let polished_ll = obj.loglik(&polished);
    if polished_ll >= ll - 1e-12 {
        w = polished;
        ll = polished_ll;
    }
    if !converged && !kkt_ok(&obj, &w, tau, 1e-6) {
        return Err(MdlError::Convergence {
            iterations: EM_MAX_ITER,
            best: w[1..].to_vec(),
            best_loglik: ll,
        });
    }
    Ok(snap(w, tau))
}

/// Weights within the boundary tolerance of τ are set to τ exactly, with
/// the difference absorbed by the largest weight.
fn snap(mut w: Vec<f64>, tau: f64) -> Vec<f64> {
    let mut moved = 0.0;
    for wi in w.iter_mut() {
        if *wi < tau + BOUNDARY_TOL {
            moved += *wi - tau;
            *wi = tau;
        }
    }
    let big = (0..w.len())
        .max_by(|&a, &b| w[a].total_cmp(&w[b]))
        .unwrap_or(0);
    w[big] += moved;
    w[1..].to_vec()
}

fn kkt_ok(obj: &MixtureObjective, w: &[f64], tau: f64, tol: f64) -> bool {
    let g = obj.gradient(w);
    let free: Vec<usize> = (0..w.len()).filter(|&i| w[i] > tau + 1e-9).collect();
    let Some(&r) = free.first() else { return true };
    let mu = g[r];
    let scale = mu.abs().max(1.0);
    free.iter().all(|&i| (g[i] - mu).abs() <= tol * scale)
        && (0..w.len())
            .filter(|i| !free.contains(i))
            .all(|i| g[i] <= mu + tol * scale)
}

/// Newton ascent on the face of currently pinned weights, pinning or
/// releasing weights until the KKT conditions hold.
fn newton_polish(obj: &MixtureObjective, mut w: Vec<f64>, tau: f64) -> Vec<f64> {
    let m = w.len();
    let mut pinned: Vec<bool> = w.iter().map(|wi| *wi < tau + 1e-7).collect();
    for wi in w.iter_mut().zip(&pinned) {
        if *wi.1 {
            *wi.0 = tau;
        }
    }
    renormalize(&mut w, &pinned, tau);
    for _round in 0..(2 * m + 2) {
        let free: Vec<usize> = (0..m).filter(|&i| !pinned[i]).collect();
        if free.len() >= 2 {
            w = newton_on_face(obj, w, &free, tau, &mut pinned);
        }
        // release pinned weights whose multiplier has the wrong sign
        let g = obj.gradient(&w);
        let free: Vec<usize> = (0..m).filter(|&i| !pinned[i]).collect();
        let Some(&r) = free.first() else { break };
        let mu = g[r];
        let release: Vec<usize> = (0..m)
            .filter(|&i| pinned[i] && g[i] > mu + 1e-12 * mu.abs().max(1.0))
            .collect();
        if release.is_empty() {
            break;
        }
        let best = *release
            .iter()
            .max_by(|&&a, &&b| g[a].total_cmp(&g[b]))
            .unwrap();
        pinned[best] = false;
    }
    w
}

fn renormalize(w: &mut [f64], pinned: &[bool], tau: f64) {
    let n_pinned = pinned.iter().filter(|p| **p).count();
    let budget = 1.0 - tau * n_pinned as f64;
    let free_sum: f64 = w
        .iter()
        .zip(pinned)
        .filter(|(_, p)| !**p)
        .map(|(v, _)| v)
        .sum();
    if free_sum > 0.0 {
        for (wi, p) in w.iter_mut().zip(pinned) {
            if !*p {
                *wi *= budget / free_sum;
            }
        }
    }
}

fn newton_on_face(
    obj: &MixtureObjective,
    mut w: Vec<f64>,
    free: &[usize],
    tau: f64,
    pinned: &mut [bool],
) -> Vec<f64> {
    let r = free[0];
    let coords: Vec<usize> = free[1..].to_vec();
    let d = coords.len();
    for _ in 0..100 {
        let g = obj.gradient(&w);
        let grad: Vec<f64> = coords.iter().map(|&j| g[j] - g[r]).collect();
        let mut h = Matrix::zeros(d, d);
        for (x, c) in &obj.support {
            let p = obj.density(&w, *x);
            for (a, &i) in coords.iter().enumerate() {
                for (b, &j) in coords.iter().enumerate() {
                    let di = obj.comps[i][*x] - obj.comps[r][*x];
                    let dj = obj.comps[j][*x] - obj.comps[r][*x];
                    h[(a, b)] -= c * di * dj / (p * p);
                }
            }
        }
        let neg = -h;
        let Some(chol) = neg.cholesky() else { break };
        let step = chol.solve(&nalgebra::DVector::from_vec(grad.clone()));
        if step.iter().all(|s| s.abs() < 1e-15) {
            break;
        }
        // largest feasible fraction of the step
        let mut frac: f64 = 1.0;
        let dr: f64 = -step.iter().sum::<f64>();
        for (a, &j) in coords.iter().enumerate() {
            if step[a] < 0.0 {
                frac = frac.min((w[j] - tau) / -step[a]);
            }
        }
        if dr < 0.0 {
            frac = frac.min((w[r] - tau) / -dr);
        }
        let base = obj.loglik(&w);
        let mut t = frac.max(0.0);
        let mut accepted = None;
        while t > 1e-12 {
            let mut cand = w.clone();
            for (a, &j) in coords.iter().enumerate() {
                cand[j] += t * step[a];
            }
            cand[r] += t * dr;
            if obj.loglik(&cand) >= base - 1e-14 {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        let Some(mut cand) = accepted else { break };
        // weights that reached the bound become pinned
        let mut hit = false;
        for &j in free {
            if cand[j] <= tau + 1e-13 {
                cand[j] = tau;
                pinned[j] = true;
                hit = true;
            }
        }
        let small_step = t * step.iter().map(|s| s.abs()).fold(dr.abs(), f64::max) < 1e-15;
        w = cand;
        if hit || small_step {
            break;
        }
    }
    w
}

/// Projected gradient ascent with a numerical gradient and backtracking;
/// the fallback for families without a closed form or EM.
fn projected_ascent(family: &dyn Family, counts: &Counts) -> Result<Vec<f64>> {
    let space = family.space();
    let (lo, hi) = space.bounding_box();
    let k = family.dim();
    let mid: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
    let mut theta = space.project(&mid);
    let f = |t: &[f64]| log_likelihood_counts(family, t, counts);
    let mut val = f(&theta);
    let mut step = 0.1 * space.width().max(1e-3);
    for _ in 0..EM_MAX_ITER {
        let h = 1e-7;
        let grad: Vec<f64> = (0..k)
            .map(|i| {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[i] += h;
                tm[i] -= h;
                let (tp, tm) = (space.project(&tp), space.project(&tm));
                let d = tp[i] - tm[i];
                if d <= 0.0 {
                    0.0
                } else {
                    (f(&tp) - f(&tm)) / d
                }
            })
            .collect();
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm == 0.0 {
            return Ok(theta);
        }
        let mut improved = false;
        while step > 1e-14 {
            let cand: Vec<f64> = theta
                .iter()
                .zip(&grad)
                .map(|(t, g)| t + step * g / gnorm)
                .collect();
            let cand = space.project(&cand);
            let cv = f(&cand);
            if cv > val + 1e-15 {
                let moved = cand
                    .iter()
                    .zip(&theta)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                theta = cand;
                val = cv;
                improved = moved > 1e-13;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            return Ok(theta);
        }
    }
    Err(MdlError::Convergence {
        iterations: EM_MAX_ITER,
        best: theta,
        best_loglik: val,
    })
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    [lo, hi, mid]
        .into_iter()
        .max_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap()
}
