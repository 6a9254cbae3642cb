use std::fmt;
use std::sync::Arc;

use crate::error::{MdlError, Result};
use crate::linalg::{self, Matrix};
use crate::models::mixture::Mixture;
use crate::models::pmf::Counts;
use crate::models::space::ParamSpace;

/// Finite-difference step for generic Hessians.
pub const HESSIAN_STEP: f64 = 1e-5;

/// Fisher information below this eigenvalue is treated as singular.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// How a family codes sequences whose MLE lies on the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryScheme {
    /// No boundary code; boundary sequences are an error.
    None,
    /// Pin mixture weights at τ and re-express the face as a smaller mixture.
    MixtureFaces,
    /// Pin box coordinates at their bounds.
    BoxFaces,
}

/// Constants a family can state in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticConstants {
    pub lambda_bar: f64,
    pub kappa: f64,
    pub b_bar: f64,
    pub kappa_prime: f64,
    pub b_bar_prime: f64,
    /// `C_ε = exp(rate · ε)`.
    pub c_epsilon_rate: f64,
}

/// A parametric model `{p_θ : θ ∈ Θ}` over the alphabet `0..M`.
pub trait Family: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn space(&self) -> &ParamSpace;

    fn alphabet_size(&self) -> usize;

    /// `p_θ(x)`; callers guarantee `θ ∈ Θ` and `x < M`.
    fn prob(&self, theta: &[f64], x: usize) -> f64;

    fn dim(&self) -> usize {
        self.space().dim()
    }

    /// Canonical exponential family, so that `Ĵ(θ; x) = J(θ)`.
    fn is_exponential(&self) -> bool {
        false
    }

    /// `Ĵ(θ; x) = −∇² log p_θ(x)`. The default uses central differences.
    fn symbol_fisher(&self, theta: &[f64], x: usize) -> Matrix {
        numeric_hessian(|t| self.prob(t, x).ln(), theta, HESSIAN_STEP)
    }

    fn boundary_scheme(&self) -> BoundaryScheme {
        BoundaryScheme::None
    }

    fn mle_closed_form(&self, _counts: &Counts) -> Option<Vec<f64>> {
        None
    }

    fn as_mixture(&self) -> Option<&Mixture> {
        None
    }

    fn analytic_constants(&self) -> Option<AnalyticConstants> {
        None
    }
}

pub type FamilyRef = Arc<dyn Family>;

/// `−∇² f` by central differences, with the stencil pulled back when it
/// would leave the domain (callers evaluate on `Θ` only, so `f` is finite
/// on a small neighbourhood in practice).
pub fn numeric_hessian(f: impl Fn(&[f64]) -> f64, theta: &[f64], h: f64) -> Matrix {
    let k = theta.len();
    let mut out = Matrix::zeros(k, k);
    let mut t = theta.to_vec();
    let f0 = f(theta);
    for i in 0..k {
        t[i] = theta[i] + h;
        let fp = f(&t);
        t[i] = theta[i] - h;
        let fm = f(&t);
        t[i] = theta[i];
        out[(i, i)] = -(fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let mut eval = |si: f64, sj: f64| {
                t[i] = theta[i] + si * h;
                t[j] = theta[j] + sj * h;
                let v = f(&t);
                t[i] = theta[i];
                t[j] = theta[j];
                v
            };
            let v = eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0);
            out[(i, j)] = -v / (4.0 * h * h);
            out[(j, i)] = out[(i, j)];
        }
    }
    out
}

fn check_theta(family: &dyn Family, theta: &[f64]) -> Result<()> {
    family.space().check(theta)
}

fn check_symbols(family: &dyn Family, xs: &[usize]) -> Result<Counts> {
    Counts::from_symbols(xs, family.alphabet_size())
}

/// `p_θ(x)` for every symbol.
pub fn probs(family: &dyn Family, theta: &[f64]) -> Vec<f64> {
    (0..family.alphabet_size())
        .map(|x| family.prob(theta, x))
        .collect()
}

/// `Σ_t log p_θ(x_t)` in nats. A symbol of probability zero yields
/// negative infinity.
pub fn log_likelihood(family: &dyn Family, theta: &[f64], xs: &[usize]) -> Result<f64> {
    check_theta(family, theta)?;
    let counts = check_symbols(family, xs)?;
    Ok(log_likelihood_counts(family, theta, &counts))
}

pub fn log_likelihood_counts(family: &dyn Family, theta: &[f64], counts: &Counts) -> f64 {
    counts
        .support()
        .map(|(x, c)| c as f64 * family.prob(theta, x).ln())
        .sum()
}

/// Average of `Ĵ(θ; x_t)` over the sequence.
pub fn empirical_fisher(family: &dyn Family, theta: &[f64], xs: &[usize]) -> Result<Matrix> {
    check_theta(family, theta)?;
    let counts = check_symbols(family, xs)?;
    if counts.n() == 0 {
        return Err(MdlError::precondition("empirical Fisher needs n >= 1"));
    }
    empirical_fisher_counts(family, theta, &counts)
}

pub fn empirical_fisher_counts(
    family: &dyn Family,
    theta: &[f64],
    counts: &Counts,
) -> Result<Matrix> {
    let k = family.dim();
    let mut acc = Matrix::zeros(k, k);
    for (x, c) in counts.support() {
        let j = family.symbol_fisher(theta, x);
        if j.iter().any(|v| !v.is_finite()) {
            return Err(MdlError::Numeric {
                symbol: x,
                what: "empirical Fisher information is not finite".into(),
            });
        }
        acc += j * c as f64;
    }
    Ok(acc / counts.n() as f64)
}

/// `J(θ) = Σ_x p_θ(x) Ĵ(θ; x)`, exact over the alphabet.
pub fn fisher<F: Family + ?Sized>(family: &F, theta: &[f64]) -> Result<Matrix> {
    let j = fisher_unchecked(family, theta);
    let min = linalg::min_eigenvalue(&j);
    if !(min >= DEGENERACY_TOL) {
        return Err(MdlError::Degenerate {
            theta: theta.to_vec(),
            min_eigenvalue: min,
        });
    }
    Ok(j)
}

/// `J(θ)` without the definiteness check.
pub fn fisher_unchecked<F: Family + ?Sized>(family: &F, theta: &[f64]) -> Matrix {
    let k = family.dim();
    let mut acc = Matrix::zeros(k, k);
    for x in 0..family.alphabet_size() {
        let p = family.prob(theta, x);
        if p > 0.0 {
            acc += family.symbol_fisher(theta, x) * p;
        }
    }
    linalg::symmetrize(&acc)
}

/// Per-symbol quantities at a fixed `θ`: everything the codec needs is a
/// linear function of the counts once these are known.
#[derive(Debug, Clone)]
pub struct SymbolTable {
    pub theta: Vec<f64>,
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub fisher: Matrix,
    /// `J^{-1/2}`.
    pub fisher_inv_sqrt: Matrix,
    /// `V(θ; x)` for every symbol (zero matrices where `p_θ(x) = 0`).
    pub v: Vec<Matrix>,
}

impl SymbolTable {
    pub fn new(family: &dyn Family, theta: &[f64]) -> Result<Self> {
        let m = family.alphabet_size();
        let k = family.dim();
        let probs = probs(family, theta);
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        let fisher = fisher(family, theta)?;
        let w = linalg::sym_inv_sqrt(&fisher);
        let id = Matrix::identity(k, k);
        let v = (0..m)
            .map(|x| {
                if probs[x] > 0.0 {
                    linalg::symmetrize(&(&w * family.symbol_fisher(theta, x) * &w)) - &id
                } else {
                    Matrix::zeros(k, k)
                }
            })
            .collect();
        Ok(SymbolTable {
            theta: theta.to_vec(),
            probs,
            log_probs,
            fisher,
            fisher_inv_sqrt: w,
            v,
        })
    }

    pub fn log_likelihood(&self, counts: &Counts) -> f64 {
        counts
            .support()
            .map(|(x, c)| c as f64 * self.log_probs[x])
            .sum()
    }

    /// `V(θ; x^n)`, the average of the per-symbol statistics.
    pub fn v_statistic(&self, counts: &Counts) -> Matrix {
        let k = self.fisher.nrows();
        let mut acc = Matrix::zeros(k, k);
        if counts.n() == 0 {
            return acc;
        }
        for (x, c) in counts.support() {
            acc += &self.v[x] * c as f64;
        }
        acc / counts.n() as f64
    }
}

/// `V(θ; x^n) = J^{-1/2} Ĵ(θ; x^n) J^{-1/2} − I`.
pub fn v_statistic(family: &dyn Family, theta: &[f64], xs: &[usize]) -> Result<Matrix> {
    check_theta(family, theta)?;
    let counts = check_symbols(family, xs)?;
    if counts.n() == 0 {
        return Err(MdlError::precondition("V statistic needs n >= 1"));
    }
    v_statistic_counts(family, theta, &counts)
}

pub fn v_statistic_counts(family: &dyn Family, theta: &[f64], counts: &Counts) -> Result<Matrix> {
    let j = fisher(family, theta)?;
    let jhat = empirical_fisher_counts(family, theta, counts)?;
    let w = linalg::sym_inv_sqrt(&j);
    let k = j.nrows();
    Ok(linalg::symmetrize(&(&w * jhat * &w)) - Matrix::identity(k, k))
}

/// Geometry the quantizer needs: a parameter space and a Fisher metric.
pub trait FisherGeometry: Sync {
    fn geometry_space(&self) -> &ParamSpace;
    fn metric(&self, theta: &[f64]) -> Result<Matrix>;
}

impl<F: Family + ?Sized> FisherGeometry for F {
    fn geometry_space(&self) -> &ParamSpace {
        self.space()
    }

    fn metric(&self, theta: &[f64]) -> Result<Matrix> {
        fisher(self, theta)
    }
}

/// A constant metric on a parameter space; the simplest test geometry.
#[derive(Debug, Clone)]
pub struct ConstantFisher {
    pub space: ParamSpace,
    pub matrix: Matrix,
}

impl ConstantFisher {
    pub fn new(space: ParamSpace, matrix: Matrix) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(MdlError::config("metric dimension does not match the space"));
        }
        if linalg::min_eigenvalue(&matrix) < DEGENERACY_TOL {
            return Err(MdlError::config("metric must be positive definite"));
        }
        Ok(ConstantFisher { space, matrix })
    }

    pub fn identity(space: ParamSpace) -> Self {
        let k = space.dim();
        ConstantFisher {
            space,
            matrix: Matrix::identity(k, k),
        }
    }
}

impl FisherGeometry for ConstantFisher {
    fn geometry_space(&self) -> &ParamSpace {
        &self.space
    }

    fn metric(&self, _theta: &[f64]) -> Result<Matrix> {
        Ok(self.matrix.clone())
    }
}
