//! Rank-constraint certificates for the output and pattern varieties.

mod constraint;
mod multi;
mod single;
mod two_block;

pub use constraint::{m_shapes, Cell, ConstraintCounts, RankConstraint, Symbol, Term};
pub use multi::{
    block_matrix_bound, block_matrix_constraint, canonical_lambda, check_layout, combination_vector,
    deep_lin_comb_constraint, enumerate_layouts, lin_comb_constraint, search_sparse_lambdas,
};
pub use single::{relations_from_kernel, single_block_constraints, single_block_dimension, LinearRelation, SingleBlockAnalysis};
pub use two_block::{
    two_block_constraints, two_block_deep, two_block_shallow, two_block_stats, SkipReason, SkippedConstraint,
    TwoBlockAnalysis, TwoBlockStats,
};
