use serde::{Deserialize, Serialize};

use crate::error::{MdlError, Result};

/// How the tilt is searched for each quantized point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    /// Every `(θ, ξ) ∈ Θ̈_n × Ξ_n`.
    #[default]
    Full,
    /// Only `ξ ∈ {0, select_xi(θ)}` per θ.
    Shortcut,
}

/// Parameters of the two-part code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodeConfig {
    /// Weight on the parameter description length, `α ≥ 1`.
    pub alpha: f64,
    /// Rényi order of the loss; `0 < λ ≤ 1 − 1/α` for the risk bounds.
    pub lambda: f64,
    /// Quantization scale.
    pub a: f64,
    /// Large-cell exponent, `0 < β < 1/2`.
    pub beta: f64,
    /// Width constant of `δ_n = sqrt(g log n / n)`; `None` picks
    /// `g = 4ναB/γ`.
    pub g: Option<f64>,
    pub nu: f64,
    /// Switch exponent, `l_1(n) = n^{-ι}`.
    pub iota: f64,
    pub use_bundle: bool,
    pub seed: u64,
    pub search: SearchMode,
    /// Fixed γ; `None` calibrates it from the exhaustive type set when that
    /// is small enough.
    pub gamma: Option<f64>,
    /// Points per axis of the θ scan behind `B`.
    pub tilt_resolution: usize,
    /// Points per axis when sampling the Δ-ball for γ.
    pub ratio_per_axis: usize,
    /// Largest number of types for which γ is calibrated.
    pub gamma_type_cap: usize,
    /// Points per axis of the assumption scan.
    pub certify_resolution: usize,
}

/// γ used when it can be neither supplied nor calibrated.
pub const FALLBACK_GAMMA: f64 = 0.5;

impl Default for CodeConfig {
    fn default() -> Self {
        CodeConfig {
            alpha: 2.0,
            lambda: 0.5,
            a: 2.0,
            beta: 0.25,
            g: None,
            nu: 0.05,
            iota: 0.25,
            use_bundle: true,
            seed: 0,
            search: SearchMode::Full,
            gamma: None,
            tilt_resolution: 101,
            ratio_per_axis: 41,
            gamma_type_cap: 20_000,
            certify_resolution: 200,
        }
    }
}

impl CodeConfig {
    /// Same configuration with `α` changed and `λ = 1 − 1/α`.
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self.lambda = 1.0 - 1.0 / alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(MdlError::config(format!("alpha must be >= 1, got {}", self.alpha)));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(MdlError::config(format!("a must be positive, got {}", self.a)));
        }
        if !(self.beta > 0.0 && self.beta < 0.5) {
            return Err(MdlError::config(format!("beta must lie in (0, 1/2), got {}", self.beta)));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(MdlError::config(format!("nu must be positive, got {}", self.nu)));
        }
        // boundary faces have codimension d = 1
        if !(self.iota > 0.0 && 2.0 * self.iota < 1.0) {
            return Err(MdlError::config(format!(
                "iota must satisfy d > 2 iota > 0 with d = 1, got {}",
                self.iota
            )));
        }
        if let Some(g) = self.g {
            if !(g > 0.0 && g.is_finite()) {
                return Err(MdlError::config(format!("g must be positive, got {g}")));
            }
        }
        if let Some(gamma) = self.gamma {
            if !(gamma > 0.0 && gamma < 1.0) {
                return Err(MdlError::config(format!("gamma must lie in (0, 1), got {gamma}")));
            }
        }
        Ok(())
    }

    /// `0 < λ ≤ 1 − 1/α`, required by the risk bounds.
    pub fn check_lambda(&self) -> Result<()> {
        let top = 1.0 - 1.0 / self.alpha;
        if self.lambda > 0.0 && self.lambda <= top + 1e-15 {
            Ok(())
        } else {
            Err(MdlError::Domain {
                theta: vec![],
                reason: format!("lambda must lie in (0, 1 - 1/alpha] = (0, {top}], got {}", self.lambda),
            })
        }
    }

    /// `l_1(n) = n^{-ι}`.
    pub fn l1(&self, n: u64) -> f64 {
        (n as f64).powf(-self.iota)
    }
}
