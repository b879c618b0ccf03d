//! Attributed-graph clustering by alternating spectral partitioning of
//! filtered node attributes with data-optimal polynomial graph-filter design.
//!
//! The crate is organized along the two halves of the alternation:
//! [`clustering`] updates the partition for fixed filtered attributes and
//! [`filter`] updates the filter for a fixed partition. [`pipeline`] drives
//! the loop, [`io`] reads datasets and writes results.

pub mod clustering;
pub mod error;
pub mod filter;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};
