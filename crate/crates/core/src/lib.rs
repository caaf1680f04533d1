//! Dyadic two-weight machinery on [0,1): grids and step functions, sparse
//! families, bilinear sparse forms, weight characteristics, and extremal
//! searches for the best constants they bound.
//!
//! The `parallel` feature (on by default) routes scan-heavy loops through
//! rayon; a `--no-default-features` build is fully sequential and produces
//! identical bytes, since only order-insensitive reductions are parallel.

pub mod characteristics;
pub mod dyadic;
pub mod error;
pub mod extremal;
pub mod forms;
pub mod gauge;
pub mod par;
mod quad;
pub mod sparse;
pub mod stopping;
pub mod young;

pub use error::{Error, Result};
