//! Exact and Monte Carlo verification of Rosenthal-type, maximal and
//! Bernstein-type moment inequalities for stationary sequences.
//!
//! The crate is layered bottom-up:
//!
//! * [`finite_space`] is an exact finite probability engine used as an oracle.
//! * [`models`] holds the stationary processes and their samplers.
//! * [`functionals`] computes the dependence quantities entering each bound.
//! * [`verifier`] assembles right-hand sides and checks the inequalities.
//! * [`density`] runs the kernel density risk experiment.

pub mod density;
pub mod error;
pub mod finite_space;
pub mod functionals;
pub mod models;
pub mod stats;
pub mod verifier;

pub use error::{LabError, Result};
