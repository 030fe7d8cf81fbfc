//! Learning the Heisenberg dynamics of geometrically local lattice Hamiltonians
//! from single-copy product-state measurements.
//!
//! The pipeline: parse a multi-step evolution plan, expand each conjugated
//! single-qubit observable in a connected-cluster series to fix a candidate
//! Pauli basis, estimate the candidate coefficients from randomized
//! single-qubit measurements, sew the learned locals into a channel on a
//! doubled register, and bound the reconstruction error against a dense
//! brute-force oracle.

pub mod applications;
pub mod cluster;
pub mod dataset;
pub mod dense;
pub mod error;
pub mod hamiltonian;
pub mod learner;
pub mod pauli;
pub mod pipeline;
pub mod reconstruct;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
