//! Fisher-shaped quantization of the parameter space.

pub mod bound;
pub mod grid;

pub use bound::{cardinality_bound, fisher_volume, BoundConstants, CardinalityBound};
pub use grid::{build_grid, build_grid_relaxed, sample_size_threshold, LargeCell, NearestPoint, QuantizedGrid};
