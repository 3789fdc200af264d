//! Jordan center tracking on infection-grown random trees.

// negated float comparisons are how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod branching;
pub mod error;
pub mod growth;
pub mod harness;
pub mod rng;
pub mod tracking;
pub mod tree;
pub mod truncated;

pub use error::{Error, Result};
