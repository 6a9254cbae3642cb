use std::f64::consts::E;

use crate::error::{MdlError, Result};
use crate::linalg::Matrix;
use crate::models::family::{AnalyticConstants, BoundaryScheme, Family};
use crate::models::pmf::Counts;
use crate::models::space::ParamSpace;

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Bernoulli in the natural parameter: `p_η(1) = σ(η)`, `η ∈ [lo, hi]`.
/// The Hessian of `log p_η(x)` does not depend on `x`, so `V ≡ 0`.
#[derive(Debug, Clone)]
pub struct BernoulliCanonical {
    space: ParamSpace,
}

impl BernoulliCanonical {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        Ok(BernoulliCanonical {
            space: ParamSpace::new_box(vec![lo], vec![hi])?,
        })
    }
}

impl Family for BernoulliCanonical {
    fn name(&self) -> String {
        let (lo, hi) = self.space.bounding_box();
        format!("bernoulli-canonical([{}, {}])", lo[0], hi[0])
    }

    fn space(&self) -> &ParamSpace {
        &self.space
    }

    fn alphabet_size(&self) -> usize {
        2
    }

    fn prob(&self, theta: &[f64], x: usize) -> f64 {
        let s = sigmoid(theta[0]);
        if x == 1 {
            s
        } else {
            sigmoid(-theta[0])
        }
    }

    fn is_exponential(&self) -> bool {
        true
    }

    fn symbol_fisher(&self, theta: &[f64], _x: usize) -> Matrix {
        let s = sigmoid(theta[0]);
        Matrix::from_element(1, 1, s * (1.0 - s))
    }

    fn boundary_scheme(&self) -> BoundaryScheme {
        BoundaryScheme::BoxFaces
    }

    fn mle_closed_form(&self, counts: &Counts) -> Option<Vec<f64>> {
        let n = counts.n() as f64;
        let k = counts.get(1) as f64;
        let eta = if k == 0.0 {
            f64::NEG_INFINITY
        } else if k == n {
            f64::INFINITY
        } else {
            (k / (n - k)).ln()
        };
        Some(self.space.project(&[eta]))
    }

    /// `J(η) = σ(1−σ)` has `|d log J/dη| ≤ 1`, so the ratio over a step
    /// `|Δ| ≤ 1` is at most `e^{|Δ|} ≤ 1 + e|Δ|`.
    fn analytic_constants(&self) -> Option<AnalyticConstants> {
        Some(AnalyticConstants {
            lambda_bar: 0.25,
            kappa: E,
            b_bar: 1.0,
            kappa_prime: E,
            b_bar_prime: 1.0,
            c_epsilon_rate: 1.0,
        })
    }
}

/// Bernoulli in the mean parameter, `θ ∈ [lo, hi] ⊆ [0, 1]`.
#[derive(Debug, Clone)]
pub struct BernoulliMean {
    space: ParamSpace,
}

impl BernoulliMean {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo < 0.0 || hi > 1.0 {
            return Err(MdlError::config("Bernoulli mean must lie in [0, 1]"));
        }
        Ok(BernoulliMean {
            space: ParamSpace::new_box(vec![lo], vec![hi])?,
        })
    }
}

impl Family for BernoulliMean {
    fn name(&self) -> String {
        let (lo, hi) = self.space.bounding_box();
        format!("bernoulli-mean([{}, {}])", lo[0], hi[0])
    }

    fn space(&self) -> &ParamSpace {
        &self.space
    }

    fn alphabet_size(&self) -> usize {
        2
    }

    fn prob(&self, theta: &[f64], x: usize) -> f64 {
        if x == 1 {
            theta[0]
        } else {
            1.0 - theta[0]
        }
    }

    fn symbol_fisher(&self, theta: &[f64], x: usize) -> Matrix {
        let t = theta[0];
        let v = if x == 1 {
            1.0 / (t * t)
        } else {
            1.0 / ((1.0 - t) * (1.0 - t))
        };
        Matrix::from_element(1, 1, v)
    }

    fn boundary_scheme(&self) -> BoundaryScheme {
        BoundaryScheme::BoxFaces
    }

    fn mle_closed_form(&self, counts: &Counts) -> Option<Vec<f64>> {
        let t = counts.get(1) as f64 / counts.n() as f64;
        Some(self.space.project(&[t]))
    }
}
