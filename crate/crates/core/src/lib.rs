//! Heralded generation of hybrid (CV–DV) and CV–CV entangled states.
//!
//! A single-mode squeezed vacuum is mixed with one arm of a delocalized
//! photon on a beam splitter, and conditioning on the photon number in the
//! auxiliary mode leaves the remaining modes entangled. The crate simulates
//! that pipeline in a truncated Fock space, evaluates the closed-form
//! series for the conditional states, quantifies entanglement, and searches
//! parameter space for maximally entangled operating points.

pub mod analytic;
pub mod cascade;
pub mod cli;
pub mod combinatorics;
pub mod dump;
pub mod entanglement;
pub mod error;
pub mod fock;
pub mod herald;
pub mod interferometer;
pub mod search;

pub use error::{Error, Result};
