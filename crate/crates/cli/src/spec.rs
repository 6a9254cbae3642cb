use std::path::{Path, PathBuf};

use mdl_core::codec::CodeConfig;
use mdl_core::models::spec::FamilySpec;
use mdl_core::types::DEFAULT_ENUMERATION_CAP;
use mdl_core::{MdlError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    RegretCurve,
    BoundAudit,
    RiskCert,
    KraftSweep,
    NmlCompare,
    Compress,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::RegretCurve => "regret-curve",
            ExperimentKind::BoundAudit => "bound-audit",
            ExperimentKind::RiskCert => "risk-cert",
            ExperimentKind::KraftSweep => "kraft-sweep",
            ExperimentKind::NmlCompare => "nml-compare",
            ExperimentKind::Compress => "compress",
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_samples() -> usize {
    200
}

fn default_trials() -> u64 {
    1_000
}

fn default_tails() -> Vec<f64> {
    vec![0.05, 0.1, 0.2]
}

fn default_cap() -> u64 {
    DEFAULT_ENUMERATION_CAP
}

fn default_tolerance() -> f64 {
    1e-9
}

/// One experiment. Relative paths are resolved against the directory of
/// the spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub family: PathBuf,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub n: Vec<u64>,
    #[serde(default)]
    pub config: CodeConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Sequences drawn per n for `regret-curve`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// True parameter for `risk-cert`.
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    /// Tail levels `b` of the Monte Carlo risk check.
    #[serde(default = "default_tails")]
    pub tails: Vec<f64>,
    /// Largest number of sequences an exhaustive sweep may enumerate.
    #[serde(default = "default_cap")]
    pub cap: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Symbol file for `compress`.
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub format: SymbolFormat,
}

/// How symbols are stored in plain files.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolFormat {
    /// One byte per symbol.
    #[default]
    Bytes,
    /// Whitespace-separated decimal integers.
    Text,
}

/// Command-line values that take precedence over the spec file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub a: Option<f64>,
    pub beta: Option<f64>,
    pub g: Option<f64>,
    pub nu: Option<f64>,
    pub iota: Option<f64>,
    pub no_bundle: bool,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, config: &mut CodeConfig) {
        if let Some(alpha) = self.alpha {
            *config = config.clone().with_alpha(alpha);
        }
        if let Some(a) = self.a {
            config.a = a;
        }
        if let Some(b) = self.beta {
            config.beta = b;
        }
        if self.g.is_some() {
            config.g = self.g;
        }
        if let Some(nu) = self.nu {
            config.nu = nu;
        }
        if let Some(iota) = self.iota {
            config.iota = iota;
        }
        if self.no_bundle {
            config.use_bundle = false;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
    }
}

impl ExperimentSpec {
    pub fn from_str(text: &str, toml_format: bool) -> Result<Self> {
        if toml_format {
            toml::from_str(text).map_err(|e| MdlError::Config(format!("experiment TOML: {e}")))
        } else {
            serde_json::from_str(text).map_err(|e| MdlError::Config(format!("experiment JSON: {e}")))
        }
    }

    /// Reads a spec file, resolves its paths and applies the overrides.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MdlError::Config(format!("{}: {e}", path.display())))?;
        let toml_format = path.extension().and_then(|e| e.to_str()) == Some("toml");
        let mut spec = Self::from_str(&text, toml_format)?;
        let base = path.parent().unwrap_or(Path::new("."));
        spec.family = base.join(&spec.family);
        spec.input = spec.input.map(|p| base.join(p));
        spec.out = match &overrides.out {
            Some(o) => o.clone(),
            None => base.join(&spec.out),
        };
        if let Some(seed) = overrides.seed {
            spec.seed = seed;
        }
        overrides.apply(&mut spec.config);
        spec.config.seed = spec.seed;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if !self.family.is_file() {
            return Err(MdlError::Config(format!("family file {} does not exist", self.family.display())));
        }
        if self.kind == ExperimentKind::Compress {
            match &self.input {
                Some(p) if p.is_file() => {}
                Some(p) => return Err(MdlError::Config(format!("input file {} does not exist", p.display()))),
                None => return Err(MdlError::Config("compress needs an input file".into())),
            }
            return Ok(());
        }
        if self.n.is_empty() {
            return Err(MdlError::Config("the n-list is empty".into()));
        }
        if self.n[0] == 0 || self.n.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MdlError::Config(format!("the n-list must be positive and ascending, got {:?}", self.n)));
        }
        if self.kind == ExperimentKind::RiskCert && self.theta.is_none() {
            return Err(MdlError::Config("risk-cert needs theta".into()));
        }
        if self.kind == ExperimentKind::RegretCurve && self.samples == 0 {
            return Err(MdlError::Config("samples must be positive".into()));
        }
        Ok(())
    }

    pub fn family_spec(&self) -> Result<FamilySpec> {
        FamilySpec::load(&self.family)
    }
}
