//! Two-part MDL codes over finite alphabets: Fisher-shaped parameter
//! quantization, local exponential tilting for non-exponential families,
//! and exhaustive oracles that check the resulting regret and risk bounds.

// Negated float comparisons below are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod models;
pub mod polytope;
pub mod quantizer;
pub mod types;
pub mod bundle;
pub mod codec;
pub mod oracles;

pub use error::{MdlError, Result};
