use std::f64::consts::E;

use crate::error::{MdlError, Result};
use crate::linalg::{self, Matrix};
use crate::models::family::{AnalyticConstants, BoundaryScheme, Family};
use crate::models::pmf::FinitePmf;
use crate::models::space::ParamSpace;

/// `p_θ = Σ_{i=0}^K θ_i q_i` with `θ_0 = 1 − Σ_{i≥1} θ_i`, over the
/// τ-simplex.
#[derive(Debug, Clone)]
pub struct Mixture {
    components: Vec<FinitePmf>,
    tau: f64,
    space: ParamSpace,
    /// `q_i − q_0` for `i = 1..=K`, indexed `[i-1][x]`.
    diffs: Vec<Vec<f64>>,
}

impl Mixture {
    pub fn new(components: Vec<FinitePmf>, tau: f64) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(MdlError::config("a mixture needs at least one component"));
        };
        let m = first.len();
        if components.iter().any(|q| q.len() != m) {
            return Err(MdlError::config("mixture components have different alphabets"));
        }
        let k = components.len() - 1;
        let space = ParamSpace::new_tau_simplex(k, tau)?;
        let diffs: Vec<Vec<f64>> = components[1..]
            .iter()
            .map(|q| (0..m).map(|x| q.get(x) - first.get(x)).collect())
            .collect();
        if k > 0 {
            let gram = Matrix::from_fn(k, k, |i, j| {
                diffs[i].iter().zip(&diffs[j]).map(|(a, b)| a * b).sum()
            });
            if linalg::min_eigenvalue(&gram) < 1e-12 {
                return Err(MdlError::config(
                    "mixture components are affinely dependent; Fisher information would be singular",
                ));
            }
        }
        Ok(Mixture {
            components,
            tau,
            space,
            diffs,
        })
    }

    pub fn from_probs(components: Vec<Vec<f64>>, tau: f64) -> Result<Self> {
        let comps = components
            .into_iter()
            .map(FinitePmf::new)
            .collect::<Result<Vec<_>>>()?;
        Mixture::new(comps, tau)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn components(&self) -> &[FinitePmf] {
        &self.components
    }

    pub fn k(&self) -> usize {
        self.components.len() - 1
    }

    /// Full weight vector `(θ_0, θ_1, …, θ_K)`.
    pub fn weights(theta: &[f64]) -> Vec<f64> {
        let mut w = Vec::with_capacity(theta.len() + 1);
        w.push(1.0 - theta.iter().sum::<f64>());
        w.extend_from_slice(theta);
        w
    }

    /// The face where the weights in `pinned` (indices into `0..=K`) sit at
    /// τ, re-expressed as a mixture of `q′_j = (1 − τ|A|) q_j + τ Σ_{i∈A} q_i`
    /// over the free indices, with lower bound `τ / (1 − τ|A|)`.
    ///
    /// Returns the sub-mixture and the free indices in order; the first free
    /// index plays the role of component 0.
    pub fn face(&self, pinned: &[usize]) -> Result<(Mixture, Vec<usize>)> {
        let k = self.k();
        if pinned.iter().any(|&i| i > k) {
            return Err(MdlError::precondition("pinned weight index out of range"));
        }
        let free: Vec<usize> = (0..=k).filter(|i| !pinned.contains(i)).collect();
        if free.is_empty() {
            return Err(MdlError::precondition("cannot pin every mixture weight"));
        }
        let a = pinned.len() as f64;
        let scale = 1.0 - self.tau * a;
        let m = self.components[0].len();
        let pinned_sum: Vec<f64> = (0..m)
            .map(|x| pinned.iter().map(|&i| self.components[i].get(x)).sum())
            .collect();
        let comps = free
            .iter()
            .map(|&j| {
                FinitePmf::normalized(
                    (0..m)
                        .map(|x| scale * self.components[j].get(x) + self.tau * pinned_sum[x])
                        .collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let tau = (self.tau / scale).min(1.0 / free.len() as f64);
        Ok((Mixture::new(comps, tau)?, free))
    }
}

impl Family for Mixture {
    fn name(&self) -> String {
        format!("mixture(K={}, M={}, tau={})", self.k(), self.alphabet_size(), self.tau)
    }

    fn space(&self) -> &ParamSpace {
        &self.space
    }

    fn alphabet_size(&self) -> usize {
        self.components[0].len()
    }

    fn prob(&self, theta: &[f64], x: usize) -> f64 {
        let mut p = self.components[0].get(x);
        for (t, d) in theta.iter().zip(&self.diffs) {
            p += t * d[x];
        }
        p.max(0.0)
    }

    fn symbol_fisher(&self, theta: &[f64], x: usize) -> Matrix {
        let k = self.k();
        let p = self.prob(theta, x);
        Matrix::from_fn(k, k, |i, j| self.diffs[i][x] * self.diffs[j][x] / (p * p))
    }

    fn boundary_scheme(&self) -> BoundaryScheme {
        BoundaryScheme::MixtureFaces
    }

    fn as_mixture(&self) -> Option<&Mixture> {
        Some(self)
    }

    fn analytic_constants(&self) -> Option<AnalyticConstants> {
        let k = self.k() as f64;
        if self.k() == 0 {
            return None;
        }
        let tau = self.tau;
        let kappa = 2.0 * E * k.sqrt() / tau;
        let b_bar = tau / (2.0 * k.sqrt());
        Some(AnalyticConstants {
            lambda_bar: k / (tau * tau),
            kappa,
            b_bar,
            kappa_prime: kappa,
            b_bar_prime: b_bar,
            c_epsilon_rate: 2.0 * k.sqrt() / tau,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::family::{
        empirical_fisher, fisher, log_likelihood, numeric_hessian, v_statistic,
    };

    fn example() -> Mixture {
        Mixture::from_probs(vec![vec![0.9, 0.1], vec![0.2, 0.8]], 0.2).unwrap()
    }

    #[test]
    fn frozen_scalar_values() {
        let m = example();
        assert!((m.prob(&[0.5], 0) - 0.55).abs() < 1e-15);
        let ll = log_likelihood(&m, &[0.5], &[0]).unwrap();
        assert!((ll - (-0.5978)).abs() < 5e-5);
        let jh = empirical_fisher(&m, &[0.5], &[0]).unwrap()[(0, 0)];
        assert!((jh - 1.6198).abs() < 5e-5);
        let j = fisher(&m, &[0.5]).unwrap()[(0, 0)];
        assert!((j - 1.9798).abs() < 5e-5);
        let v = v_statistic(&m, &[0.5], &[0]).unwrap()[(0, 0)];
        assert!((v - (-0.1818)).abs() < 5e-5);
    }

    #[test]
    fn closed_form_matches_finite_differences() {
        let m = Mixture::from_probs(
            vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.3, 0.6], vec![0.2, 0.7, 0.1]],
            0.1,
        )
        .unwrap();
        let theta = [0.3, 0.25];
        for x in 0..3 {
            let exact = m.symbol_fisher(&theta, x);
            let approx = numeric_hessian(|t| m.prob(t, x).ln(), &theta, 1e-5);
            assert!((exact - approx).abs().max() < 1e-4);
        }
    }

    #[test]
    fn rejects_dependent_components() {
        assert!(Mixture::from_probs(vec![vec![0.5, 0.5], vec![0.5, 0.5]], 0.1).is_err());
    }

    #[test]
    fn face_reproduces_pinned_density() {
        let m = Mixture::from_probs(
            vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.3, 0.6], vec![0.2, 0.7, 0.1]],
            0.1,
        )
        .unwrap();
        // pin weight 2 at tau; free weights 0 and 1
        let (sub, free) = m.face(&[2]).unwrap();
        assert_eq!(free, vec![0, 1]);
        assert_eq!(sub.k(), 1);
        let full = [0.35, 0.1];
        // sub-coordinate: weight of free index 1 relative to 1 - tau
        let sub_theta = [0.35 / 0.9];
        for x in 0..3 {
            assert!((m.prob(&full, x) - sub.prob(&sub_theta, x)).abs() < 1e-12);
        }
        assert!((sub.tau() - 0.1 / 0.9).abs() < 1e-15);
    }
}
