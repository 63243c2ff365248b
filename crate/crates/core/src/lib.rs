//! Group recommendation with item dependencies over heterogeneous
//! information networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`hin`]: network schema, meta-path specs, and the sparse binary
//!   interaction matrices (explicit, dependency, and multi-hop).
//! - [`nn`]: a small dense numerical core (tensors, activations, Adam,
//!   initialisation, finite-difference gradient checks).
//! - [`model`]: path-aware attention user preferences, gated fusion, group
//!   aggregation, and their closed-form backward passes.
//! - [`train`]: user and group losses and the two-stage optimisation loop.
//! - [`eval`]: data splitting, ranking, HR@N / NDCG@N, and ablation variants.
//! - [`io`]: TSV datasets, synthetic generators, checkpoints, metric files.

pub mod error;
pub mod eval;
pub mod hin;
pub mod io;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod train;

pub use error::{Error, ErrorKind, Result};
