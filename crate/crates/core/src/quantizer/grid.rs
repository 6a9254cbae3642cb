//! The quantized parameter set: lattice cubes of side `a n^{-β}`, each
//! tiled by rectangles aligned with the eigenvectors of `J(θ_S)` with sides
//! `a / √(n λ_i)`.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{MdlError, Result};
use crate::linalg::{self, Matrix};
use crate::models::family::FisherGeometry;
use crate::models::space::ParamSpace;
use crate::polytope::{Polytope, FEAS_TOL};

#[derive(Debug, Clone, Serialize)]
pub struct LargeCell {
    pub index: Vec<i64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub center: Vec<f64>,
    pub theta_s: Vec<f64>,
    #[serde(skip)]
    pub fisher: Matrix,
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Matrix,
    pub sides: Vec<f64>,
    /// The cube is not contained in Θ.
    pub boundary: bool,
}

#[derive(Debug, Clone)]
pub struct QuantizedGrid {
    pub n: u64,
    pub a: f64,
    pub beta: f64,
    pub cube_side: f64,
    /// Smallest `n` for which the construction's guarantees are proven,
    /// when `n` is below it.
    pub below_threshold: Option<f64>,
    cells: Vec<LargeCell>,
    points: Vec<Vec<f64>>,
    parents: Vec<Option<usize>>,
    lookup: HashMap<Vec<i64>, usize>,
}

/// Result of [`QuantizedGrid::nearest_point`].
#[derive(Debug, Clone, PartialEq)]
pub struct NearestPoint {
    pub index: usize,
    pub point: Vec<f64>,
    /// `(θ̈ − θ̂)ᵀ J(θ_S) (θ̈ − θ̂)` with `θ_S` the anchor of θ̂'s cell.
    pub quad: f64,
    pub cell: Option<usize>,
}

/// `max(2, (√K a / b̄)^{1/β})`.
pub fn sample_size_threshold(k: usize, a: f64, beta: f64, b_bar: f64) -> f64 {
    ((k as f64).sqrt() * a / b_bar).powf(1.0 / beta).max(2.0)
}

fn validate(n: u64, a: f64, beta: f64) -> Result<()> {
    if n == 0 {
        return Err(MdlError::precondition("grid needs n >= 1"));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(MdlError::config(format!("scale a must be positive, got {a}")));
    }
    if !(beta > 0.0 && beta < 0.5) {
        return Err(MdlError::config(format!("beta must lie in (0, 1/2), got {beta}")));
    }
    Ok(())
}

/// Builds the grid, refusing sample sizes below `(√K a / b̄)^{1/β}`.
pub fn build_grid<G: FisherGeometry + ?Sized>(
    geom: &G,
    n: u64,
    a: f64,
    beta: f64,
    b_bar: f64,
) -> Result<QuantizedGrid> {
    validate(n, a, beta)?;
    let k = geom.geometry_space().dim();
    let threshold = sample_size_threshold(k, a, beta, b_bar);
    if (n as f64) < threshold {
        return Err(MdlError::precondition(format!(
            "n = {n} is below max(2, (sqrt(K) a / b_bar)^(1/beta)) = {threshold:.6e}"
        )));
    }
    build(geom, n, a, beta, None)
}

/// Builds the grid for any `n ≥ 1`, recording when `n` is below the
/// threshold instead of refusing.
pub fn build_grid_relaxed<G: FisherGeometry + ?Sized>(
    geom: &G,
    n: u64,
    a: f64,
    beta: f64,
    b_bar: f64,
) -> Result<QuantizedGrid> {
    validate(n, a, beta)?;
    let k = geom.geometry_space().dim();
    let threshold = sample_size_threshold(k, a, beta, b_bar);
    let below = ((n as f64) < threshold).then_some(threshold);
    build(geom, n, a, beta, below)
}

fn build<G: FisherGeometry + ?Sized>(
    geom: &G,
    n: u64,
    a: f64,
    beta: f64,
    below_threshold: Option<f64>,
) -> Result<QuantizedGrid> {
    let space = geom.geometry_space();
    let k = space.dim();
    let h = a * (n as f64).powf(-beta);
    if k == 0 {
        let mut g = QuantizedGrid::from_points(vec![vec![]]);
        g.n = n;
        g.a = a;
        g.beta = beta;
        g.cube_side = h;
        return Ok(g);
    }
    let (lo, hi) = space.bounding_box();
    let ranges: Vec<(i64, i64)> = (0..k)
        .map(|i| {
            let first = (lo[i] / h).floor() as i64;
            let last = ((hi[i] / h).ceil() as i64 - 1).max(first);
            (first, last)
        })
        .collect();
    let indices = lattice(&ranges);
    let built: Vec<Option<(LargeCell, Vec<Vec<f64>>)>> = indices
        .par_iter()
        .map(|idx| build_cell(geom, space, idx, h, n, a))
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    let mut points = Vec::new();
    let mut parents = Vec::new();
    let mut lookup = HashMap::new();
    for (cell, pts) in built.into_iter().flatten() {
        let ci = cells.len();
        lookup.insert(cell.index.clone(), ci);
        for p in pts {
            points.push(p);
            parents.push(Some(ci));
        }
        cells.push(cell);
    }
    if points.is_empty() {
        return Err(MdlError::Construction("no quantized point lies in the space".into()));
    }
    Ok(QuantizedGrid {
        n,
        a,
        beta,
        cube_side: h,
        below_threshold,
        cells,
        points,
        parents,
        lookup,
    })
}

fn lattice(ranges: &[(i64, i64)]) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        out.push(idx.clone());
        // last axis fastest: lexicographic lattice order
        let mut i = ranges.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < ranges[i].1 {
                idx[i] += 1;
                break;
            }
            idx[i] = ranges[i].0;
        }
    }
}

/// Integer offsets `0..m_i` per axis, last axis fastest.
fn offsets(counts: &[usize]) -> Vec<Vec<usize>> {
    let ranges: Vec<(i64, i64)> = counts.iter().map(|&m| (0, m as i64 - 1)).collect();
    lattice(&ranges)
        .into_iter()
        .map(|v| v.into_iter().map(|x| x as usize).collect())
        .collect()
}

fn build_cell<G: FisherGeometry + ?Sized>(
    geom: &G,
    space: &ParamSpace,
    idx: &[i64],
    h: f64,
    n: u64,
    a: f64,
) -> Result<Option<(LargeCell, Vec<Vec<f64>>)>> {
    let k = idx.len();
    let lo: Vec<f64> = idx.iter().map(|&i| i as f64 * h).collect();
    let hi: Vec<f64> = idx.iter().map(|&i| (i + 1) as f64 * h).collect();
    if !space.overlaps_cube_interior(&lo, &hi) {
        return Ok(None);
    }
    let center: Vec<f64> = lo.iter().zip(&hi).map(|(l, u)| 0.5 * (l + u)).collect();
    let mut region = space.polytope();
    region.push_box(&lo, &hi);
    let Some(mut theta_s) = region.project(&center) else {
        return Ok(None);
    };
    if !space.contains(&theta_s, 0.0) {
        theta_s = space.project(&theta_s);
    }
    let fisher = geom.metric(&theta_s)?;
    let eig = linalg::sym_eigen(&fisher);
    let nf = n as f64;
    let sides: Vec<f64> = eig.values.iter().map(|l| a / (nf * l).sqrt()).collect();
    let u = &eig.vectors;
    let boundary = !cube_corners(&lo, &hi)
        .iter()
        .all(|c| space.contains(c, 0.0));

    // extent of the clipped cube along each eigen-axis, relative to θ_S
    let verts = region.vertices();
    let axis = |i: usize, v: &[f64]| -> f64 { (0..k).map(|r| u[(r, i)] * (v[r] - theta_s[r])).sum() };
    let mut counts = Vec::with_capacity(k);
    let mut starts = Vec::with_capacity(k);
    for (i, side) in sides.iter().enumerate() {
        let (mn, mx) = verts
            .iter()
            .map(|v| axis(i, v))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(t), b.max(t)));
        let m = (((mx - mn) / side) - 1e-9).ceil().max(1.0) as usize;
        let mid = 0.5 * (mn + mx);
        counts.push(m);
        starts.push(mid - 0.5 * (m as f64 - 1.0) * side);
    }

    // Θ and the cube in rotated coordinates t = Uᵀ(θ − θ_S)
    let to_t = |p: &Polytope| -> Polytope {
        let mut out = Polytope::new(k);
        for (nv, b) in p.constraints() {
            let rot: Vec<f64> = (0..k).map(|c| (0..k).map(|r| u[(r, c)] * nv[r]).sum()).collect();
            let shift: f64 = nv.iter().zip(&theta_s).map(|(x, y)| x * y).sum();
            out.push(rot, b - shift);
        }
        out
    };
    let region_t = to_t(&region);
    let space_t = to_t(&space.polytope());
    let from_t = |t: &[f64]| -> Vec<f64> {
        (0..k)
            .map(|r| theta_s[r] + (0..k).map(|c| u[(r, c)] * t[c]).sum::<f64>())
            .collect()
    };

    let mut pts = Vec::new();
    for off in offsets(&counts) {
        let tc: Vec<f64> = (0..k).map(|i| starts[i] + off[i] as f64 * sides[i]).collect();
        let rlo: Vec<f64> = (0..k).map(|i| tc[i] - 0.5 * sides[i]).collect();
        let rhi: Vec<f64> = (0..k).map(|i| tc[i] + 0.5 * sides[i]).collect();
        if !rect_meets(&region_t, &rlo, &rhi) {
            continue;
        }
        let center = from_t(&tc);
        if space.contains(&center, 0.0) {
            pts.push(center);
            continue;
        }
        // closest point of Θ ∩ rectangle in the J(θ_S) metric: Euclidean in
        // y = diag(√λ) t
        let sq: Vec<f64> = eig.values.iter().map(|l| l.sqrt()).collect();
        let mut py = Polytope::new(k);
        for (nv, b) in space_t.constraints() {
            py.push(nv.iter().zip(&sq).map(|(x, s)| x / s).collect(), b);
        }
        let ylo: Vec<f64> = (0..k).map(|i| rlo[i] * sq[i]).collect();
        let yhi: Vec<f64> = (0..k).map(|i| rhi[i] * sq[i]).collect();
        py.push_box(&ylo, &yhi);
        let yc: Vec<f64> = (0..k).map(|i| tc[i] * sq[i]).collect();
        let Some(y) = py.project(&yc) else { continue };
        let t: Vec<f64> = (0..k).map(|i| y[i] / sq[i]).collect();
        let mut p = from_t(&t);
        if !space.contains(&p, 0.0) {
            p = space.project(&p);
        }
        pts.push(p);
    }
    let cell = LargeCell {
        index: idx.to_vec(),
        lo,
        hi,
        center,
        theta_s,
        eigenvalues: eig.values.clone(),
        eigenvectors: eig.vectors.clone(),
        fisher,
        sides,
        boundary,
    };
    Ok(Some((cell, pts)))
}

fn cube_corners(lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    let k = lo.len();
    (0..1usize << k)
        .map(|mask| {
            (0..k)
                .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                .collect()
        })
        .collect()
}

/// The axis-aligned box `[rlo, rhi]` meets the polytope.
fn rect_meets(region: &Polytope, rlo: &[f64], rhi: &[f64]) -> bool {
    let corners = cube_corners(rlo, rhi);
    if corners.iter().any(|c| region.contains(c, FEAS_TOL)) {
        return true;
    }
    let mid: Vec<f64> = rlo.iter().zip(rhi).map(|(a, b)| 0.5 * (a + b)).collect();
    if region.contains(&mid, FEAS_TOL) {
        return true;
    }
    let mut p = region.clone();
    p.push_box(rlo, rhi);
    p.is_nonempty()
}

impl QuantizedGrid {
    /// A grid with the given points and no cell structure; nearest points
    /// are then Euclidean.
    pub fn from_points(points: Vec<Vec<f64>>) -> Self {
        let parents = vec![None; points.len()];
        QuantizedGrid {
            n: 0,
            a: 0.0,
            beta: 0.0,
            cube_side: 0.0,
            below_threshold: None,
            cells: Vec::new(),
            points,
            parents,
            lookup: HashMap::new(),
        }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn cells(&self) -> &[LargeCell] {
        &self.cells
    }

    pub fn parent(&self, i: usize) -> Option<&LargeCell> {
        self.parents[i].map(|c| &self.cells[c])
    }

    /// `L_n = log |Θ̈_n|` in nats.
    pub fn code_length(&self) -> f64 {
        (self.points.len() as f64).ln()
    }

    /// The large cell containing θ. Points on shared faces, and points of
    /// cubes discarded for meeting Θ in measure zero, resolve to the first
    /// kept cube whose closed hull contains them.
    pub fn cell_of(&self, theta: &[f64]) -> Option<usize> {
        if self.cells.is_empty() {
            return None;
        }
        let h = self.cube_side;
        let idx: Vec<i64> = theta.iter().map(|t| (t / h).floor() as i64).collect();
        if let Some(&c) = self.lookup.get(&idx) {
            return Some(c);
        }
        let tol = 1e-12 * (1.0 + h);
        let closed = |c: &LargeCell| {
            c.lo
                .iter()
                .zip(&c.hi)
                .zip(theta)
                .all(|((l, u), t)| *t >= l - tol && *t <= u + tol)
        };
        if let Some(c) = self.cells.iter().position(closed) {
            return Some(c);
        }
        (0..self.cells.len()).min_by(|&a, &b| {
            linalg::euclid(&self.cells[a].center, theta)
                .total_cmp(&linalg::euclid(&self.cells[b].center, theta))
        })
    }

    /// The grid point closest to θ̂ in the metric `J(θ_S)` of θ̂'s cell
    /// (Euclidean for grids without cells); ties go to the lowest index.
    pub fn nearest_point(&self, theta_hat: &[f64]) -> Result<NearestPoint> {
        if self.points.is_empty() {
            return Err(MdlError::Construction("empty grid".into()));
        }
        let cell = self.cell_of(theta_hat);
        let k = theta_hat.len();
        let metric = match cell {
            Some(c) => self.cells[c].fisher.clone(),
            None => Matrix::identity(k, k),
        };
        let mut best = (f64::INFINITY, 0usize);
        let mut z = vec![0.0; k];
        for (i, p) in self.points.iter().enumerate() {
            for r in 0..k {
                z[r] = p[r] - theta_hat[r];
            }
            let q = linalg::quad_form(&metric, &z);
            if q < best.0 {
                best = (q, i);
            }
        }
        let index = best.1;
        let point = self.points[index].clone();
        let quad = match cell {
            Some(c) => {
                let zz: Vec<f64> = point.iter().zip(theta_hat).map(|(a, b)| a - b).collect();
                linalg::quad_form(&self.cells[c].fisher, &zz)
            }
            None => best.0,
        };
        Ok(NearestPoint {
            index,
            point,
            quad,
            cell,
        })
    }

    /// CSV with one row per point: index, coordinates, parent cell lattice
    /// index (`:`-joined) and the parent's boundary flag.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let k = self.points.first().map_or(0, |p| p.len());
        let mut header = vec!["index".to_string()];
        header.extend((1..=k).map(|i| format!("theta_{i}")));
        header.push("cell".into());
        header.push("boundary".into());
        writeln!(w, "{}", header.join(","))?;
        for (i, p) in self.points.iter().enumerate() {
            let coords: Vec<String> = p.iter().map(|v| format!("{v:.17e}")).collect();
            let (cell, boundary) = match self.parent(i) {
                Some(c) => (
                    c.index
                        .iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join(":"),
                    c.boundary,
                ),
                None => (String::new(), false),
            };
            let mut row = vec![i.to_string()];
            row.extend(coords);
            row.push(cell);
            row.push(boundary.to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}
