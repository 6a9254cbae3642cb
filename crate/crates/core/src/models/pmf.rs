use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MdlError, Result};

/// Normalization tolerance for probability vectors.
pub const PMF_TOL: f64 = 1e-12;

/// A probability mass function over `0..M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FinitePmf {
    probs: Vec<f64>,
}

impl FinitePmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(MdlError::config("empty probability vector"));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(MdlError::Numeric {
                symbol: i,
                what: format!("invalid probability {p}"),
            });
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_TOL {
            return Err(MdlError::config(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(FinitePmf { probs })
    }

    /// Builds a pmf from non-negative weights, normalizing them. Used for
    /// values read from decimal files, which rarely sum to exactly one.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MdlError::config("weights must be non-negative with a positive sum"));
        }
        FinitePmf::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(m: usize) -> Self {
        FinitePmf {
            probs: vec![1.0 / m as f64; m],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, x: usize) -> f64 {
        self.probs[x]
    }

    /// `n` i.i.d. draws.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        let dist = WeightedIndex::new(&self.probs).expect("a pmf has positive total weight");
        (0..n).map(|_| dist.sample(rng)).collect()
    }
}

impl TryFrom<Vec<f64>> for FinitePmf {
    type Error = MdlError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        FinitePmf::new(v)
    }
}

impl From<FinitePmf> for Vec<f64> {
    fn from(p: FinitePmf) -> Vec<f64> {
        p.probs
    }
}

/// Symbol counts of a sequence: everything in this crate depends on `x^n`
/// only through them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Counts {
    counts: Vec<u64>,
    n: u64,
}

impl Counts {
    pub fn new(counts: Vec<u64>) -> Self {
        let n = counts.iter().sum();
        Counts { counts, n }
    }

    pub fn from_symbols(xs: &[usize], alphabet: usize) -> Result<Self> {
        let mut counts = vec![0u64; alphabet];
        for &x in xs {
            if x >= alphabet {
                return Err(MdlError::Alphabet {
                    symbol: x,
                    alphabet,
                });
            }
            counts[x] += 1;
        }
        Ok(Counts::new(counts))
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn alphabet(&self) -> usize {
        self.counts.len()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, x: usize) -> u64 {
        self.counts[x]
    }

    /// Symbols with a non-zero count, with their counts.
    pub fn support(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(x, c)| (x, *c))
    }
}
