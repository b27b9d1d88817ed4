//! Single-band non-Hermitian lattice models on a chain: Toeplitz Hamiltonians,
//! point-gap topology, singular-value spectra, Hermitian doubling, linear
//! response and disorder ensembles.

pub mod bloch;
pub mod disorder;
pub mod error;
pub mod gssh;
pub mod model;
pub mod response;
pub mod svd;
pub mod tol;

pub use error::{Error, Result};
pub use tol::Tolerances;

/// Shorthand used throughout: double-precision complex scalar.
pub type C64 = num_complex::Complex64;
