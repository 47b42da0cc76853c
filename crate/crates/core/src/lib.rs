//! Operator-space Lanczos machinery for finite spin chains.
//!
//! The crate computes Lanczos coefficients `b_n` of local observables under
//! the Liouvillian `[H, ·]` at infinite temperature, rebuilds autocorrelation
//! functions and their infinite-time plateau from the tridiagonal Liouvillian,
//! and provides the rate / cumulative-product / fit pipeline used to study the
//! large-`n` behaviour of the coefficients at finite size. A dense exact
//! diagonalization oracle is included for small chains.
//!
//! Module map:
//!
//! * [`pauli`]: Pauli strings and sparse operator vectors.
//! * [`hamiltonians`]: the spin-chain models and named observables.
//! * [`krylov`]: the three-term (SA) and fully reorthogonalized (FO) engines.
//! * [`spectral`]: everything computed from the `b_n` alone.
//! * [`ed`]: dense exact diagonalization reference.
//! * [`analysis`]: rates, crossover, cumulative products, fits, classifiers.
//! * [`export`]: CSV renderers shared by the command-line front-end.

pub mod analysis;
mod dd;
pub mod ed;
mod error;
pub mod export;
pub mod hamiltonians;
pub mod krylov;
pub mod par;
pub mod pauli;
pub mod spectral;

pub use error::{Error, Result};
