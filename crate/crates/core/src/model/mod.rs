//! Architectures, activation patterns, parameters, and the piecewise-linear
//! maps they define.

mod eval;
mod paths;
pub mod regions;
mod types;

pub use eval::{block_matrices, block_output, forward_eval, masked_matrix};
pub(crate) use eval::masked_unchecked;
pub use paths::{all_paths, effective_widths, enumerate_active_paths, path_indicator, path_matrix, width_rank};
pub use regions::{region_scan, Grid, RegionScan, Slice};
pub use types::{Architecture, BlockPattern, ParamAssignment, PathSet, Pattern};
