use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MdlError, Result};
use crate::polytope::Polytope;

/// Tolerance for deciding that a constraint is active.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// A compact convex parameter set: a box, or the τ-simplex of mixture
/// weights `{θ ∈ ℝ^K : θ_i ≥ τ, θ_0 = 1 − Σθ_i ≥ τ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ParamSpace {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    TauSimplex { k: usize, tau: f64 },
}

/// One face of the parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Face {
    /// `θ_i = lo_i` of a box.
    Lower(usize),
    /// `θ_i = hi_i` of a box.
    Upper(usize),
    /// Mixture weight `i ∈ 0..=K` pinned at τ.
    Weight(usize),
}

impl ParamSpace {
    pub fn new_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(MdlError::config("box bounds have different lengths"));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(MdlError::config(format!(
                "box bounds must satisfy lo < hi: {lo:?} {hi:?}"
            )));
        }
        Ok(ParamSpace::Box { lo, hi })
    }

    pub fn new_tau_simplex(k: usize, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau <= 1.0 / (k as f64 + 1.0) + 1e-15) {
            return Err(MdlError::config(format!(
                "tau-simplex needs 0 < tau <= 1/(K+1) = {}, got {tau}",
                1.0 / (k as f64 + 1.0)
            )));
        }
        Ok(ParamSpace::TauSimplex { k, tau })
    }

    pub fn dim(&self) -> usize {
        match self {
            ParamSpace::Box { lo, .. } => lo.len(),
            ParamSpace::TauSimplex { k, .. } => *k,
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ParamSpace::Box { lo, hi } => (lo.clone(), hi.clone()),
            ParamSpace::TauSimplex { k, tau } => {
                let hi = 1.0 - *k as f64 * tau;
                (vec![*tau; *k], vec![hi; *k])
            }
        }
    }

    /// Largest per-coordinate extent.
    pub fn width(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.iter()
            .zip(&hi)
            .map(|(l, h)| h - l)
            .fold(0.0, f64::max)
    }

    /// Signed slack of every constraint (non-negative inside), paired with
    /// the face it belongs to.
    pub fn slacks(&self, theta: &[f64]) -> Vec<(Face, f64)> {
        match self {
            ParamSpace::Box { lo, hi } => {
                let mut out = Vec::with_capacity(2 * lo.len());
                for i in 0..lo.len() {
                    out.push((Face::Lower(i), theta[i] - lo[i]));
                    out.push((Face::Upper(i), hi[i] - theta[i]));
                }
                out
            }
            ParamSpace::TauSimplex { tau, .. } => {
                let w0 = 1.0 - theta.iter().sum::<f64>();
                let mut out = vec![(Face::Weight(0), w0 - tau)];
                out.extend(
                    theta
                        .iter()
                        .enumerate()
                        .map(|(i, t)| (Face::Weight(i + 1), t - tau)),
                );
                out
            }
        }
    }

    pub fn contains(&self, theta: &[f64], tol: f64) -> bool {
        theta.len() == self.dim()
            && theta.iter().all(|t| t.is_finite())
            && self.slacks(theta).iter().all(|(_, s)| *s >= -tol)
    }

    pub fn is_interior(&self, theta: &[f64], tol: f64) -> bool {
        self.slacks(theta).iter().all(|(_, s)| *s > tol)
    }

    /// Faces whose constraint is within `tol` of being tight.
    pub fn active_set(&self, theta: &[f64], tol: f64) -> Vec<Face> {
        self.slacks(theta)
            .into_iter()
            .filter(|(_, s)| *s <= tol)
            .map(|(f, _)| f)
            .collect()
    }

    pub fn check(&self, theta: &[f64]) -> Result<()> {
        if self.contains(theta, 1e-12) {
            Ok(())
        } else {
            Err(MdlError::Domain {
                theta: theta.to_vec(),
                reason: format!("not in {self:?}"),
            })
        }
    }

    pub fn polytope(&self) -> Polytope {
        let k = self.dim();
        let mut p = Polytope::new(k);
        match self {
            ParamSpace::Box { lo, hi } => p.push_box(lo, hi),
            ParamSpace::TauSimplex { tau, .. } => {
                for i in 0..k {
                    let mut e = vec![0.0; k];
                    e[i] = -1.0;
                    p.push(e, -tau);
                }
                p.push(vec![1.0; k], 1.0 - tau);
            }
        }
        p
    }

    /// Euclidean projection onto the space.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        match self {
            ParamSpace::Box { lo, hi } => theta
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(t, (l, h))| t.clamp(*l, *h))
                .collect(),
            ParamSpace::TauSimplex { k, tau } => {
                let (lo, hi) = self.bounding_box();
                let mut p = project_capped_sum(theta, &lo, &hi, 1.0 - tau)
                    .unwrap_or_else(|| vec![*tau; *k]);
                // rounding can leave θ_0 a few ulps below τ; shave the
                // largest coordinate until the point is inside exactly
                for _ in 0..64 {
                    if self.contains(&p, 0.0) {
                        break;
                    }
                    let (i, _) = p
                        .iter()
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |b, (i, v)| if *v > b.1 { (i, *v) } else { b });
                    let excess = (p.iter().sum::<f64>() - (1.0 - tau)).max(f64::EPSILON * 0.5);
                    p[i] = (p[i] - excess).max(*tau);
                }
                p
            }
        }
    }

    /// Uniform sample (rejection from the bounding box).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let (lo, hi) = self.bounding_box();
        loop {
            let t: Vec<f64> = lo
                .iter()
                .zip(&hi)
                .map(|(l, h)| l + (h - l) * rng.gen::<f64>())
                .collect();
            if self.contains(&t, 0.0) {
                return t;
            }
        }
    }

    /// Tensor grid with `per_axis` points per coordinate (endpoints
    /// included), restricted to the space.
    pub fn grid(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let k = self.dim();
        if k == 0 {
            return vec![vec![]];
        }
        let per_axis = per_axis.max(2);
        let (lo, hi) = self.bounding_box();
        let mut out = Vec::new();
        let mut idx = vec![0usize; k];
        loop {
            let t: Vec<f64> = (0..k)
                .map(|i| lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / (per_axis - 1) as f64)
                .collect();
            if self.contains(&t, 1e-12) {
                out.push(self.project(&t));
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

    /// Cube `[lo, hi)` has an intersection with the space of positive volume.
    pub fn overlaps_cube_interior(&self, lo: &[f64], hi: &[f64]) -> bool {
        let tol = 1e-12;
        match self {
            ParamSpace::Box { lo: a, hi: b } => (0..lo.len())
                .all(|i| hi[i].min(b[i]) - lo[i].max(a[i]) > tol * (1.0 + b[i].abs())),
            ParamSpace::TauSimplex { tau, .. } => {
                hi.iter().all(|h| *h > tau + tol)
                    && lo.iter().map(|l| l.max(*tau)).sum::<f64>() < 1.0 - tau - tol
            }
        }
    }
}

/// Euclidean projection onto `{lo ≤ θ ≤ hi, Σθ ≤ cap}` by bisection on the
/// multiplier of the sum constraint.
pub fn project_capped_sum(theta: &[f64], lo: &[f64], hi: &[f64], cap: f64) -> Option<Vec<f64>> {
    if lo.iter().sum::<f64>() > cap + 1e-12 {
        return None;
    }
    let clip = |mu: f64| -> Vec<f64> {
        theta
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(t, (l, h))| (t - mu).clamp(*l, *h))
            .collect()
    };
    let first = clip(0.0);
    if first.iter().sum::<f64>() <= cap {
        return Some(first);
    }
    let (mut a, mut b) = (0.0_f64, 1.0_f64);
    while clip(b).iter().sum::<f64>() > cap {
        b *= 2.0;
        if b > 1e12 {
            return Some(lo.to_vec());
        }
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if clip(m).iter().sum::<f64>() > cap {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 1e-17 * (1.0 + b) {
            break;
        }
    }
    Some(clip(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_slacks_and_width() {
        let s = ParamSpace::new_tau_simplex(2, 0.1).unwrap();
        assert!((s.width() - 0.7).abs() < 1e-15);
        assert!(s.contains(&[0.3, 0.3], 0.0));
        assert!(!s.contains(&[0.5, 0.45], 0.0));
        assert_eq!(s.active_set(&[0.1, 0.4], 1e-9), vec![Face::Weight(1)]);
        assert_eq!(s.active_set(&[0.1, 0.8], 1e-9).len(), 2);
    }

    #[test]
    fn rejects_large_tau() {
        assert!(ParamSpace::new_tau_simplex(1, 0.6).is_err());
        assert!(ParamSpace::new_tau_simplex(1, 0.5).is_ok());
        assert!(ParamSpace::new_tau_simplex(2, 0.0).is_err());
    }

    #[test]
    fn projection_lands_inside() {
        let s = ParamSpace::new_tau_simplex(2, 0.1).unwrap();
        let p = s.project(&[0.9, 0.9]);
        assert!(s.contains(&p, 1e-12));
        assert!((p[0] - 0.45).abs() < 1e-9 && (p[1] - 0.45).abs() < 1e-9);
        let b = ParamSpace::new_box(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(b.project(&[1.3]), vec![1.0]);
    }

    #[test]
    fn grid_covers_corners() {
        let s = ParamSpace::new_tau_simplex(2, 0.2).unwrap();
        let g = s.grid(5);
        assert!(g.iter().all(|t| s.contains(t, 1e-12)));
        assert!(g.iter().any(|t| (t[0] - 0.2).abs() < 1e-12 && (t[1] - 0.6).abs() < 1e-12));
    }

    #[test]
    fn half_open_cube_overlap() {
        let b = ParamSpace::new_box(vec![0.0], vec![1.0]).unwrap();
        assert!(b.overlaps_cube_interior(&[0.5], &[1.0]));
        assert!(!b.overlaps_cube_interior(&[1.0], &[1.5]));
    }
}
