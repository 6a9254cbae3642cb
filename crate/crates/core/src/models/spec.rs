use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{MdlError, Result};
use crate::models::bernoulli::{BernoulliCanonical, BernoulliMean};
use crate::models::family::FamilyRef;
use crate::models::mixture::Mixture;
use crate::models::pmf::FinitePmf;

/// Decimal component tables are accepted when they sum to one within this.
pub const DECIMAL_SUM_TOL: f64 = 1e-6;

/// On-disk description of a family (JSON or TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilySpec {
    Mixture {
        #[serde(default)]
        alphabet: Option<usize>,
        components: Vec<Vec<f64>>,
        tau: f64,
    },
    BernoulliCanonical {
        lo: f64,
        hi: f64,
    },
    BernoulliMean {
        lo: f64,
        hi: f64,
    },
}

impl FamilySpec {
    pub fn build(&self) -> Result<FamilyRef> {
        match self {
            FamilySpec::Mixture {
                alphabet,
                components,
                tau,
            } => {
                let comps = components
                    .iter()
                    .enumerate()
                    .map(|(i, q)| {
                        if let Some(m) = alphabet {
                            if q.len() != *m {
                                return Err(MdlError::config(format!(
                                    "component {i} has {} entries, alphabet is {m}",
                                    q.len()
                                )));
                            }
                        }
                        let s: f64 = q.iter().sum();
                        if (s - 1.0).abs() > DECIMAL_SUM_TOL {
                            return Err(MdlError::config(format!(
                                "component {i} sums to {s}"
                            )));
                        }
                        FinitePmf::normalized(q.clone())
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Arc::new(Mixture::new(comps, *tau)?))
            }
            FamilySpec::BernoulliCanonical { lo, hi } => {
                Ok(Arc::new(BernoulliCanonical::new(*lo, *hi)?))
            }
            FamilySpec::BernoulliMean { lo, hi } => Ok(Arc::new(BernoulliMean::new(*lo, *hi)?)),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| MdlError::config(format!("family JSON: {e}")))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| MdlError::config(format!("family TOML: {e}")))
    }

    /// Reads a spec, choosing the format from the extension (`.toml`,
    /// anything else is JSON).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MdlError::config(format!("{}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text),
            _ => Self::from_json(&text),
        }
    }
}
