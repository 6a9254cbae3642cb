//! Parametric families over a finite alphabet.

pub mod bernoulli;
pub mod certify;
pub mod family;
pub mod mixture;
pub mod mle;
pub mod pmf;
pub mod restricted;
pub mod space;
pub mod spec;

pub use bernoulli::{BernoulliCanonical, BernoulliMean};
pub use certify::{certify_assumptions, AssumptionConstants, Provenance};
pub use family::{
    empirical_fisher, empirical_fisher_counts, fisher, log_likelihood, log_likelihood_counts,
    probs, v_statistic, v_statistic_counts, BoundaryScheme, ConstantFisher, Family, FamilyRef,
    FisherGeometry, SymbolTable,
};
pub use mixture::Mixture;
pub use mle::{mle, mle_counts, MleResult};
pub use pmf::{Counts, FinitePmf};
pub use restricted::{descriptor_count, faces_from_descriptor, restrict, Embedding, Restriction};
pub use space::{Face, ParamSpace};
pub use spec::FamilySpec;
