use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::{self, TiltConstants, TiltingGrid};
use crate::codec::config::{CodeConfig, SearchMode, FALLBACK_GAMMA};
use crate::error::{MdlError, Result};
use crate::linalg::Matrix;
use crate::models::certify::{certify_assumptions, AssumptionConstants, Provenance};
use crate::models::family::{BoundaryScheme, FamilyRef, SymbolTable};
use crate::models::mle::mle_counts;
use crate::models::pmf::Counts;
use crate::models::restricted::{restrict, Restriction};
use crate::models::space::{Face, BOUNDARY_TOL};
use crate::quantizer::{build_grid_relaxed, QuantizedGrid};
use crate::types;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Interior,
    Boundary,
}

/// The face a boundary encoding was made on.
#[derive(Debug, Clone, Serialize)]
pub struct FaceInfo {
    pub descriptor: u64,
    pub descriptor_count: u64,
    pub active: Vec<Face>,
}

/// One codeword: the chosen `(θ̈, ξ̈)` and every length in nats.
#[derive(Debug, Clone, Serialize)]
pub struct Encoding {
    pub route: Route,
    pub n: u64,
    pub theta_index: usize,
    /// θ̈ in the coordinates of the coded family (embedded back for faces).
    pub theta: Vec<f64>,
    pub xi_index: usize,
    #[serde(skip)]
    pub xi: Matrix,
    pub face: Option<FaceInfo>,
    /// `−log p̄_{θ̈,ξ̈}(x^n)`.
    pub data_length: f64,
    /// `α(L_n + L̃_n)`.
    pub model_length: f64,
    /// `α log(#faces)` on the boundary route.
    pub descriptor_length: f64,
    /// `α l_1` or `−α log(1 − e^{−l_1})`; zero for the plain code.
    pub switch_length: f64,
    pub total: f64,
    /// Same codeword priced with `α = 1`: what a real bitstream spends.
    pub ideal_unweighted: f64,
    pub theta_hat: Vec<f64>,
    pub mle_log_likelihood: f64,
    /// `log p̄_{θ̈,ξ̈}(x)` per symbol.
    pub log_probs: Vec<f64>,
}

impl Encoding {
    /// `total − (−log p_θ̂(x^n))`; negative values are kept.
    pub fn regret(&self) -> f64 {
        self.total + self.mle_log_likelihood
    }
}

pub fn regret(encoding: &Encoding) -> f64 {
    encoding.regret()
}

/// How the tilt parameters of a codebook were obtained.
#[derive(Debug, Clone, Serialize)]
pub struct BundleInfo {
    pub tilts: TiltingGrid,
    pub constants: Option<TiltConstants>,
    pub gamma_provenance: Provenance,
    /// Radius Δ of the ball used for γ.
    pub delta_ball: f64,
    /// Types that entered the γ calibration.
    pub calibration_types: usize,
    /// `V ≡ 0`: tilts exist but never change a density.
    pub trivial: bool,
}

/// Best interior codeword of one codebook.
#[derive(Debug, Clone)]
pub struct InteriorChoice {
    pub theta_index: usize,
    pub xi_index: usize,
    pub data_length: f64,
    /// `L_n + L̃_n` (unweighted).
    pub model_raw: f64,
}

/// A face of the parameter space with its own codebook.
pub struct FaceCode {
    pub restriction: Restriction,
    pub codebook: Codebook,
}

/// Everything needed to encode sequences of one length `n`.
pub struct Codebook {
    family: FamilyRef,
    pub n: u64,
    pub config: CodeConfig,
    pub grid: QuantizedGrid,
    pub tables: Vec<SymbolTable>,
    pub constants: Option<AssumptionConstants>,
    pub bundle: Option<BundleInfo>,
    tilt_count: usize,
    alphabet: usize,
    /// `log p̄_{θ_i, ξ_j}(x)` at `(i · T + j) · M + x`.
    log_probs: Vec<f64>,
    faces: Mutex<BTreeMap<u64, Arc<FaceCode>>>,
}

impl std::fmt::Debug for Codebook {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Codebook")
            .field("family", &self.family.name())
            .field("n", &self.n)
            .field("points", &self.grid.len())
            .field("tilts", &self.tilt_count)
            .finish()
    }
}

impl Codebook {
    pub fn build(family: FamilyRef, n: u64, config: &CodeConfig) -> Result<Self> {
        config.validate()?;
        if n == 0 {
            return Err(MdlError::precondition("a codebook needs n >= 1"));
        }
        let k = family.dim();
        let constants = if k == 0 {
            None
        } else {
            Some(certify_assumptions(family.as_ref(), config.certify_resolution)?)
        };
        let grid = match &constants {
            None => QuantizedGrid::from_points(vec![vec![]]),
            Some(c) => build_grid_relaxed(family.as_ref(), n, config.a, config.beta, c.b_bar)?,
        };
        Self::assemble(family, n, config, grid, constants)
    }

    /// A codebook over a caller-supplied parameter grid, with `L_n = log |grid|`.
    /// Assumption constants are only computed when the bundle needs them.
    pub fn with_grid(family: FamilyRef, n: u64, config: &CodeConfig, grid: QuantizedGrid) -> Result<Self> {
        config.validate()?;
        if n == 0 {
            return Err(MdlError::precondition("a codebook needs n >= 1"));
        }
        if grid.is_empty() {
            return Err(MdlError::precondition("a codebook needs at least one grid point"));
        }
        for p in grid.points() {
            family.space().check(p)?;
        }
        let constants = if family.dim() > 0 && config.use_bundle && n >= 2 {
            Some(certify_assumptions(family.as_ref(), config.certify_resolution)?)
        } else {
            None
        };
        Self::assemble(family, n, config, grid, constants)
    }

    fn assemble(
        family: FamilyRef,
        n: u64,
        config: &CodeConfig,
        grid: QuantizedGrid,
        constants: Option<AssumptionConstants>,
    ) -> Result<Self> {
        let k = family.dim();
        let tables = grid
            .points()
            .par_iter()
            .map(|p| SymbolTable::new(family.as_ref(), p))
            .collect::<Result<Vec<_>>>()?;
        let bundle = match &constants {
            Some(c) if config.use_bundle && n >= 2 => {
                Some(calibrate_bundle(&family, n, config, c, &grid)?)
            }
            _ => None,
        };
        let tilt_count = bundle.as_ref().map_or(1, |b| b.tilts.len());
        let alphabet = family.alphabet_size();
        let rows: Vec<Vec<f64>> = tables
            .par_iter()
            .map(|t| {
                let mut row = Vec::with_capacity(tilt_count * alphabet);
                for j in 0..tilt_count {
                    let xi = match &bundle {
                        Some(b) => b.tilts.xi(j),
                        None => Matrix::zeros(k, k),
                    };
                    row.extend(bundle::tilted_log_probs(t, &xi)?);
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Codebook {
            family,
            n,
            config: config.clone(),
            grid,
            tables,
            constants,
            bundle,
            tilt_count,
            alphabet,
            log_probs: rows.concat(),
            faces: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn family(&self) -> &FamilyRef {
        &self.family
    }

    pub fn tilt_count(&self) -> usize {
        self.tilt_count
    }

    /// `log p̄_{θ_i, ξ_j}(x)` for every symbol.
    pub fn row(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.tilt_count + j) * self.alphabet;
        &self.log_probs[start..start + self.alphabet]
    }

    /// `L̃_n(ξ_j)`; zero when the codebook has no tilts.
    pub fn tilt_length(&self, j: usize) -> f64 {
        self.bundle.as_ref().map_or(0.0, |b| b.tilts.code_length(j))
    }

    pub fn xi(&self, j: usize) -> Matrix {
        let k = self.family.dim();
        self.bundle.as_ref().map_or_else(|| Matrix::zeros(k, k), |b| b.tilts.xi(j))
    }

    pub fn l1(&self) -> f64 {
        self.config.l1(self.n)
    }

    fn check_counts(&self, counts: &Counts) -> Result<()> {
        if counts.n() != self.n {
            return Err(MdlError::precondition(format!(
                "codebook for n = {} used on a sequence of length {}",
                self.n,
                counts.n()
            )));
        }
        if counts.alphabet() != self.alphabet {
            return Err(MdlError::precondition(format!(
                "codebook alphabet {} does not match counts over {} symbols",
                self.alphabet,
                counts.alphabet()
            )));
        }
        Ok(())
    }

    fn data_length(&self, i: usize, j: usize, counts: &Counts) -> f64 {
        let row = self.row(i, j);
        -counts.support().map(|(x, c)| c as f64 * row[x]).sum::<f64>()
    }

    /// `argmin −log p̄_{θ,ξ}(x^n) + α(L_n(θ) + L̃_n(ξ))`, first index pair on
    /// ties.
    pub fn interior(&self, counts: &Counts) -> Result<InteriorChoice> {
        self.check_counts(counts)?;
        let alpha = self.config.alpha;
        let ln = self.grid.code_length();
        let mut best: Option<(f64, InteriorChoice)> = None;
        let consider = |i: usize, j: usize, best: &mut Option<(f64, InteriorChoice)>| {
            let data = self.data_length(i, j, counts);
            let model_raw = ln + self.tilt_length(j);
            let total = data + alpha * model_raw;
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                *best = Some((
                    total,
                    InteriorChoice {
                        theta_index: i,
                        xi_index: j,
                        data_length: data,
                        model_raw,
                    },
                ));
            }
        };
        for i in 0..self.grid.len() {
            match (self.config.search, &self.bundle) {
                (SearchMode::Shortcut, Some(b)) => {
                    let v = self.tables[i].v_statistic(counts);
                    let sel = bundle::select_xi(&v, &b.tilts);
                    consider(i, 0, &mut best);
                    if sel != 0 {
                        consider(i, sel, &mut best);
                    }
                }
                _ => {
                    for j in 0..self.tilt_count {
                        consider(i, j, &mut best);
                    }
                }
            }
        }
        let (total, choice) = best.ok_or_else(|| MdlError::Construction("empty codebook".into()))?;
        if !total.is_finite() {
            return Err(MdlError::Numeric {
                symbol: counts.support().map(|(x, _)| x).next().unwrap_or(0),
                what: "every codeword assigns zero probability to the data".into(),
            });
        }
        Ok(choice)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        choice: &InteriorChoice,
        route: Route,
        theta: Vec<f64>,
        face: Option<FaceInfo>,
        descriptor_nats: f64,
        switch_raw: f64,
        fit: (Vec<f64>, f64),
    ) -> Encoding {
        let alpha = self.config.alpha;
        let model_length = alpha * choice.model_raw;
        let descriptor_length = alpha * descriptor_nats;
        let switch_length = alpha * switch_raw;
        Encoding {
            route,
            n: self.n,
            theta_index: choice.theta_index,
            theta,
            xi_index: choice.xi_index,
            xi: self.xi(choice.xi_index),
            face,
            data_length: choice.data_length,
            model_length,
            descriptor_length,
            switch_length,
            total: choice.data_length + model_length + descriptor_length + switch_length,
            ideal_unweighted: choice.data_length + choice.model_raw + descriptor_nats + switch_raw,
            theta_hat: fit.0,
            mle_log_likelihood: fit.1,
            log_probs: self.row(choice.theta_index, choice.xi_index).to_vec(),
        }
    }

    /// The interior two-part code alone, for every sequence, without the
    /// route switch.
    pub fn encode_plain(&self, counts: &Counts) -> Result<Encoding> {
        let choice = self.interior(counts)?;
        let fit = mle_counts(self.family.as_ref(), counts)?;
        Ok(self.finish(
            &choice,
            Route::Interior,
            self.grid.point(choice.theta_index).to_vec(),
            None,
            0.0,
            0.0,
            (fit.theta, fit.loglik),
        ))
    }

    /// The combined code: interior route when θ̂ is interior, the face code
    /// otherwise.
    pub fn encode(&self, counts: &Counts) -> Result<Encoding> {
        self.check_counts(counts)?;
        let fit = mle_counts(self.family.as_ref(), counts)?;
        if self.family.space().is_interior(&fit.theta, BOUNDARY_TOL) {
            let choice = self.interior(counts)?;
            return Ok(self.finish(
                &choice,
                Route::Interior,
                self.grid.point(choice.theta_index).to_vec(),
                None,
                0.0,
                self.l1(),
                (fit.theta, fit.loglik),
            ));
        }
        let active = self.family.space().active_set(&fit.theta, BOUNDARY_TOL);
        self.encode_on_face(counts, &active, (fit.theta, fit.loglik))
    }

    /// The boundary route; refuses sequences whose MLE is interior.
    pub fn boundary_encode(&self, counts: &Counts) -> Result<Encoding> {
        self.check_counts(counts)?;
        let fit = mle_counts(self.family.as_ref(), counts)?;
        if self.family.space().is_interior(&fit.theta, BOUNDARY_TOL) {
            return Err(MdlError::precondition("the MLE is interior; use the interior route"));
        }
        let active = self.family.space().active_set(&fit.theta, BOUNDARY_TOL);
        self.encode_on_face(counts, &active, (fit.theta, fit.loglik))
    }

    fn encode_on_face(&self, counts: &Counts, active: &[Face], fit: (Vec<f64>, f64)) -> Result<Encoding> {
        let face = self.face_code(active)?;
        let sub = &face.codebook;
        let choice = sub.interior(counts)?;
        let l1 = self.l1();
        let switch_raw = -(-(-l1).exp_m1()).ln();
        let r = &face.restriction;
        let theta = r.embedding.embed(sub.grid.point(choice.theta_index));
        let info = FaceInfo {
            descriptor: r.descriptor,
            descriptor_count: r.descriptor_count,
            active: r.active.clone(),
        };
        let mut e = sub.finish(&choice, Route::Boundary, theta, Some(info), r.descriptor_nats(), switch_raw, fit);
        e.n = self.n;
        Ok(e)
    }

    /// The face code for an active set, built on first use and cached.
    pub fn face_code(&self, active: &[Face]) -> Result<Arc<FaceCode>> {
        if self.family.boundary_scheme() == BoundaryScheme::None {
            return Err(MdlError::Unsupported(format!(
                "{} has no boundary code",
                self.family.name()
            )));
        }
        let restriction = restrict(&self.family, active)?;
        if let Some(f) = self.faces.lock().expect("face cache poisoned").get(&restriction.descriptor) {
            return Ok(f.clone());
        }
        // built outside the lock: construction runs rayon jobs, and a
        // worker blocking on the lock while holding a stolen job deadlocks
        let codebook = Codebook::build(restriction.family.clone(), self.n, &self.config)?;
        let entry = Arc::new(FaceCode {
            restriction: restriction.clone(),
            codebook,
        });
        let mut cache = self.faces.lock().expect("face cache poisoned");
        Ok(cache.entry(restriction.descriptor).or_insert(entry).clone())
    }

    /// Encodes a symbol sequence with the combined code.
    pub fn encode_symbols(&self, xs: &[usize]) -> Result<Encoding> {
        self.encode(&Counts::from_symbols(xs, self.alphabet)?)
    }
}

fn calibrate_bundle(
    family: &FamilyRef,
    n: u64,
    config: &CodeConfig,
    c: &AssumptionConstants,
    grid: &QuantizedGrid,
) -> Result<BundleInfo> {
    let k = family.dim();
    let kf = k as f64;
    let delta_ball = c
        .b_bar
        .max(1.01 * (kf * config.a * config.a / (4.0 * n as f64 * c.zeta)).sqrt());
    let tilt = if family.is_exponential() {
        None
    } else {
        match bundle::calibrate_tilt(
            family.as_ref(),
            config.nu,
            config.alpha,
            config.tilt_resolution,
            grid.points(),
        ) {
            Ok(t) => Some(t),
            Err(MdlError::Unsupported(_)) => None,
            Err(e) => return Err(e),
        }
    };
    let Some(tilt) = tilt else {
        // V ≡ 0: any positive B works and tilts change nothing
        let gamma = config.gamma.unwrap_or(bundle::GAMMA_SAFETY);
        let g = config.g.unwrap_or_else(|| bundle::default_g(config.nu, config.alpha, 1.0, gamma));
        let tilts = TiltingGrid::new(k, n, g, gamma, 1.0, config.nu)?;
        tilts.check_rate(config.alpha)?;
        return Ok(BundleInfo {
            tilts,
            constants: None,
            gamma_provenance: Provenance::ClosedForm,
            delta_ball,
            calibration_types: 0,
            trivial: true,
        });
    };
    let (gamma, provenance, used) = match config.gamma {
        Some(g) => (g, Provenance::Uncertified, 0),
        None => {
            let m = family.alphabet_size();
            let type_count = binomial(n + m as u64 - 1, m as u64 - 1);
            if type_count <= config.gamma_type_cap as f64 {
                let all = types::all_types(n, m);
                let ratios = bundle::v_ratios(
                    family.as_ref(),
                    &all,
                    delta_ball,
                    config.ratio_per_axis,
                    Some(grid),
                )?;
                let gamma = bundle::calibrate_gamma(&ratios, n, config.nu, config.alpha, tilt.b);
                (gamma, Provenance::GridCertified, ratios.len())
            } else {
                (FALLBACK_GAMMA, Provenance::Uncertified, 0)
            }
        }
    };
    if !(gamma > 0.0) {
        return Err(MdlError::Construction(
            "no positive gamma satisfies the V-ratio condition on this type set".into(),
        ));
    }
    let g = config
        .g
        .unwrap_or_else(|| bundle::default_g(config.nu, config.alpha, tilt.b, gamma));
    let tilts = TiltingGrid::new(k, n, g, gamma, tilt.b, config.nu)?;
    tilts.check_rate(config.alpha)?;
    Ok(BundleInfo {
        tilts,
        constants: Some(tilt),
        gamma_provenance: provenance,
        delta_ball,
        calibration_types: used,
        trivial: false,
    })
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
