//! Experiment driver for the sparse-form library: config-driven ensembles
//! of weight pairs and sparse families, norm and testing-constant
//! computations, theorem verification suites with per-sample assertions,
//! and a conjecture hunter.
//!
//! The binary (`sparseform`) is a thin wrapper over [`runner::run`]; the
//! integration and acceptance tests drive the same entry points.

pub mod config;
pub mod generate;
pub mod hunt;
pub mod report;
pub mod runner;
pub mod suite;
