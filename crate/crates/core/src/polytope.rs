//! Tiny H-polytopes `{y : A y ≤ b}` in dimension K ≤ 4.
//!
//! Everything here is exact up to a feasibility tolerance: vertices are found
//! by enumerating K-subsets of constraints, and Euclidean projections by
//! enumerating KKT active sets. Both are combinatorial but the constraint
//! counts involved (cubes, rectangles, simplices) stay in the tens.

use nalgebra::{DMatrix, DVector};

pub const FEAS_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
pub struct Polytope {
    dim: usize,
    normals: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

impl Polytope {
    pub fn new(dim: usize) -> Self {
        Polytope {
            dim,
            normals: Vec::new(),
            offsets: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    /// Adds the half-space `a · y ≤ b`.
    pub fn push(&mut self, a: Vec<f64>, b: f64) {
        debug_assert_eq!(a.len(), self.dim);
        self.normals.push(a);
        self.offsets.push(b);
    }

    /// Adds `lo_i ≤ y_i ≤ hi_i` for every coordinate.
    pub fn push_box(&mut self, lo: &[f64], hi: &[f64]) {
        for i in 0..self.dim {
            let mut e = vec![0.0; self.dim];
            e[i] = 1.0;
            self.push(e.clone(), hi[i]);
            e[i] = -1.0;
            self.push(e, -lo[i]);
        }
    }

    pub fn extend(&mut self, other: &Polytope) {
        assert_eq!(self.dim, other.dim);
        self.normals.extend(other.normals.iter().cloned());
        self.offsets.extend(other.offsets.iter().copied());
    }

    pub fn constraints(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.normals
            .iter()
            .map(|a| a.as_slice())
            .zip(self.offsets.iter().copied())
    }

    /// Largest constraint violation `max_i (a_i·y − b_i)` (≤ 0 when inside).
    pub fn violation(&self, y: &[f64]) -> f64 {
        self.constraints()
            .map(|(a, b)| dot(a, y) - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        self.normals.is_empty() || self.violation(y) <= tol
    }

    /// All vertices (points where K linearly independent constraints are
    /// tight and the rest hold). Duplicates from degenerate vertices are
    /// merged.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let k = self.dim;
        if k == 0 {
            return if self.contains(&[], FEAS_TOL) {
                vec![vec![]]
            } else {
                vec![]
            };
        }
        let mut out: Vec<Vec<f64>> = Vec::new();
        for subset in combinations(self.len(), k) {
            let a = DMatrix::from_fn(k, k, |r, c| self.normals[subset[r]][c]);
            let b = DVector::from_fn(k, |r, _| self.offsets[subset[r]]);
            let Some(y) = solve(&a, &b) else { continue };
            let y: Vec<f64> = y.iter().copied().collect();
            if self.contains(&y, FEAS_TOL * scale(&y))
                && !out.iter().any(|v| max_abs_diff(v, &y) < 1e-12)
            {
                out.push(y);
            }
        }
        out
    }

    /// Non-emptiness for bounded polytopes (a bounded non-empty polytope
    /// always has a vertex).
    pub fn is_nonempty(&self) -> bool {
        let k = self.dim;
        if k == 0 {
            return self.contains(&[], FEAS_TOL);
        }
        for subset in combinations(self.len(), k) {
            let a = DMatrix::from_fn(k, k, |r, c| self.normals[subset[r]][c]);
            let b = DVector::from_fn(k, |r, _| self.offsets[subset[r]]);
            if let Some(y) = solve(&a, &b) {
                let y: Vec<f64> = y.iter().copied().collect();
                if self.contains(&y, FEAS_TOL * scale(&y)) {
                    return true;
                }
            }
        }
        false
    }

    /// `(min, max)` of `dir · y` over the polytope, or `None` when empty.
    pub fn extent(&self, dir: &[f64]) -> Option<(f64, f64)> {
        let verts = self.vertices();
        if verts.is_empty() {
            return None;
        }
        let vals = verts.iter().map(|v| dot(dir, v));
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        });
        Some((lo, hi))
    }

    /// Euclidean projection of `c` onto the polytope, or `None` when the
    /// polytope is empty.
    pub fn project(&self, c: &[f64]) -> Option<Vec<f64>> {
        let k = self.dim;
        if self.contains(c, 0.0) {
            return Some(c.to_vec());
        }
        let m = self.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for size in 1..=k.min(m) {
            for subset in combinations(m, size) {
                let a = DMatrix::from_fn(size, k, |r, col| self.normals[subset[r]][col]);
                let gram = &a * a.transpose();
                let cv = DVector::from_column_slice(c);
                let rhs = &a * &cv - DVector::from_fn(size, |r, _| self.offsets[subset[r]]);
                let Some(mu) = solve(&gram, &rhs) else { continue };
                if mu.iter().any(|&v| v < -1e-12) {
                    continue;
                }
                let y = cv - a.transpose() * mu;
                let y: Vec<f64> = y.iter().copied().collect();
                if !self.contains(&y, FEAS_TOL * scale(&y)) {
                    continue;
                }
                let d: f64 = y.iter().zip(c).map(|(p, q)| (p - q) * (p - q)).sum();
                if best.as_ref().is_none_or(|(bd, _)| d < *bd - 1e-15) {
                    best = Some((d, y));
                }
            }
        }
        best.map(|(_, y)| y)
    }
}

fn scale(y: &[f64]) -> f64 {
    1.0 + y.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    let norm = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if norm == 0.0 {
        return None;
    }
    let lu = a.clone().lu();
    let d = lu.determinant();
    if d.abs() < 1e-12 * norm.powi(n as i32) {
        return None;
    }
    lu.solve(b)
}

/// Lexicographic `size`-subsets of `0..m`.
pub fn combinations(m: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if size > m {
        return out;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        out.push(idx.clone());
        let mut i = size;
        while i > 0 && idx[i - 1] == m - size + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Polytope {
        let mut p = Polytope::new(2);
        p.push_box(&[0.0, 0.0], &[1.0, 1.0]);
        p
    }

    #[test]
    fn combinations_count() {
        assert_eq!(combinations(5, 2).len(), 10);
        assert_eq!(combinations(4, 4).len(), 1);
        assert_eq!(combinations(3, 0).len(), 1);
        assert!(combinations(2, 3).is_empty());
    }

    #[test]
    fn square_vertices_and_projection() {
        let p = unit_square();
        assert_eq!(p.vertices().len(), 4);
        let y = p.project(&[2.0, 0.5]).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-12 && (y[1] - 0.5).abs() < 1e-12);
        let y = p.project(&[2.0, -3.0]).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-12 && y[1].abs() < 1e-12);
    }

    #[test]
    fn simplex_cut_projection_matches_closed_form() {
        // unit square ∩ {x + y ≤ 1}; projecting (1, 1) lands on (0.5, 0.5)
        let mut p = unit_square();
        p.push(vec![1.0, 1.0], 1.0);
        let y = p.project(&[1.0, 1.0]).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-12 && (y[1] - 0.5).abs() < 1e-12);
        assert_eq!(p.vertices().len(), 3);
    }

    #[test]
    fn empty_intersection_detected() {
        let mut p = unit_square();
        p.push(vec![1.0, 1.0], -0.5);
        assert!(!p.is_nonempty());
        assert!(p.project(&[0.3, 0.3]).is_none());
    }
}
