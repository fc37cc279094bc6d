//! Polynomial constraints on the outputs of ReLU networks over activation
//! regions.
//!
//! On a fixed activation pattern a ReLU network is linear, so the outputs of
//! a batch of inputs sharing patterns satisfy determinantal (rank) constraints.
//! This crate constructs those constraints exactly, verifies them on random
//! integer parameters with exact rational arithmetic, computes the dimension of
//! the parametrized output space from exact Jacobian ranks, and turns
//! constraints on the linear pieces into constraints on the outputs of a given
//! dataset.

pub mod dimension;
pub mod error;
pub mod invariants;
pub mod linalg;
pub mod model;
pub mod par;
pub mod poly;
pub mod rational;
pub mod report;
pub mod transform;
pub mod verify;

pub use error::{Error, Result};
