//! Spectral and entanglement statistics of the non-unitary random circuit `T = zeta U`.
//!
//! `zeta = exp(h sum_j Z_j)` is a diagonal field on `N` qubits and `U` a Haar unitary on
//! `D = 2^N` states. The crate samples the ensemble, evolves products of transfer matrices,
//! diagonalizes them, and evaluates the large-`D` predictions they are compared against.

extern crate blas_src;

pub mod dbm;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod perm;
pub mod special;
pub mod sff;
pub mod spectral;
pub mod stats;
pub mod theory;
pub mod weingarten;

pub use error::{Error, Result};
