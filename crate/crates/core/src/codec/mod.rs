//! The two-part code: codebook construction, encoding routes, closed-form
//! regret bounds and a bitstream that realizes the code lengths.

pub mod arith;
pub mod bitstream;
pub mod bounds;
pub mod codebook;
pub mod config;

pub use bitstream::{decode_bitstream, encode_bitstream, read_bitstream, write_bitstream, Bitstream};
pub use bounds::{c_gn, c_n, exp_regret_bound, nonexp_regret_bound, RegretReport};
pub use codebook::{regret, BundleInfo, Codebook, Encoding, FaceCode, FaceInfo, InteriorChoice, Route};
pub use config::{CodeConfig, SearchMode, FALLBACK_GAMMA};
