use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{Codebook, Encoding, Route};
use crate::error::Result;
use crate::models::pmf::Counts;
use crate::oracles::weighted_types;
use crate::types::representative;

/// Which code a sweep evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodeKind {
    /// Interior two-part code for every sequence, no switch.
    Plain,
    /// Interior or boundary route with the switch lengths.
    Combined,
}

fn encode(cb: &Codebook, kind: CodeKind, c: &Counts) -> Result<Encoding> {
    match kind {
        CodeKind::Plain => cb.encode_plain(c),
        CodeKind::Combined => cb.encode(c),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KraftReport {
    pub n: u64,
    pub alpha: f64,
    pub kind: CodeKind,
    pub sum: f64,
    pub interior_sum: f64,
    pub boundary_sum: f64,
    pub sequences: u64,
}

/// `Σ_{x^n} exp(−total(x^n))`. Terms are reduced in type order so the sum
/// does not depend on scheduling.
pub fn exhaustive_kraft(cb: &Codebook, kind: CodeKind, cap: u64) -> Result<KraftReport> {
    let types = weighted_types(cb.n, cb.family().alphabet_size(), cap)?;
    let terms = types
        .par_iter()
        .map(|(c, w)| {
            let e = encode(cb, kind, c)?;
            Ok((e.route, (w - e.total).exp()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut interior, mut boundary) = (0.0, 0.0);
    for (route, t) in terms {
        match route {
            Route::Interior => interior += t,
            Route::Boundary => boundary += t,
        }
    }
    Ok(KraftReport {
        n: cb.n,
        alpha: cb.config.alpha,
        kind,
        sum: interior + boundary,
        interior_sum: interior,
        boundary_sum: boundary,
        sequences: crate::types::sequence_count(cb.n, cb.family().alphabet_size()).unwrap_or(u64::MAX),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RouteMax {
    pub value: f64,
    pub argmax: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MaxRegret {
    pub n: u64,
    pub kind: CodeKind,
    pub value: f64,
    pub argmax: Vec<usize>,
    pub route: Route,
    pub interior: Option<RouteMax>,
    pub boundary: Option<RouteMax>,
}

/// `max_{x^n} REG`, split by route; the first type in lexicographic order
/// wins ties.
pub fn exhaustive_max_regret(cb: &Codebook, kind: CodeKind, cap: u64) -> Result<MaxRegret> {
    let types = weighted_types(cb.n, cb.family().alphabet_size(), cap)?;
    let rows = types
        .par_iter()
        .map(|(c, _)| {
            let e = encode(cb, kind, c)?;
            Ok((e.route, e.regret()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut interior: Option<(f64, usize)> = None;
    let mut boundary: Option<(f64, usize)> = None;
    for (i, (route, r)) in rows.iter().enumerate() {
        let slot = match route {
            Route::Interior => &mut interior,
            Route::Boundary => &mut boundary,
        };
        if slot.is_none_or(|(b, _)| *r > b) {
            *slot = Some((*r, i));
        }
    }
    let to_max = |s: Option<(f64, usize)>| {
        s.map(|(value, i)| RouteMax {
            value,
            argmax: representative(&types[i].0),
        })
    };
    let (value, idx, route) = match (interior, boundary) {
        (Some(a), Some(b)) if b.0 > a.0 => (b.0, b.1, Route::Boundary),
        (Some(a), _) => (a.0, a.1, Route::Interior),
        (None, Some(b)) => (b.0, b.1, Route::Boundary),
        (None, None) => unreachable!("every n >= 1 has at least one type"),
    };
    Ok(MaxRegret {
        n: cb.n,
        kind,
        value,
        argmax: representative(&types[idx].0),
        route,
        interior: to_max(interior),
        boundary: to_max(boundary),
    })
}
