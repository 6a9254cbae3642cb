//! Brute-force ground truth. Every sweep runs over the types of `𝒳^n`
//! weighted by their multinomial counts, which is exact for i.i.d. models,
//! and refuses alphabets where `M^n` exceeds the enumeration cap.

pub mod divergence;
pub mod nml;
pub mod obligations;
pub mod risk;
pub mod sweep;

pub use divergence::{kl, kl_divergence, renyi, renyi_divergence, DivergenceKind, DivergenceValue};
pub use nml::{asymptotic_minimax_regret, bernoulli_shtarkov_closed_form, shtarkov_complexity};
pub use obligations::{audit_theorem3, PartOneRow, PartTwoRow, TheoremThreeAudit};
pub use risk::{
    trial_rng, verify_theorem1, verify_theorem1_with, verify_theorem2, verify_theorem2_with, RiskCertificate, TailRow,
};
pub use sweep::{exhaustive_kraft, exhaustive_max_regret, CodeKind, KraftReport, MaxRegret, RouteMax};

use crate::error::Result;
use crate::models::pmf::Counts;
use crate::types::{all_types, check_cap, log_factorials, log_multinomial};

/// Types of `𝒳^n` with the log number of sequences in each.
pub(crate) fn weighted_types(n: u64, m: usize, cap: u64) -> Result<Vec<(Counts, f64)>> {
    check_cap(n, m, cap)?;
    let lf = log_factorials(n);
    Ok(all_types(n, m)
        .into_iter()
        .map(|c| {
            let w = log_multinomial(&c, &lf);
            (c, w)
        })
        .collect())
}
