//! Numerics for Dunkl analysis on product reflection groups.
//!
//! The crate covers, for finite reflection groups acting on `R^N` with
//! positive multiplicity functions:
//!
//! * root systems, reflection groups, orbits, chambers, and weighted
//!   reflection-walk sums ([`rootsystem`]);
//! * the associated polynomial-weight measure and ball volumes ([`measure`]);
//! * exact Dunkl heat kernels for products of rank-1 systems, the Dunkl
//!   Laplacian, and two-sided kernel envelopes ([`heat`]);
//! * Gauss-Legendre panel quadrature utilities ([`quad`]);
//! * discretized Schroedinger semigroups `exp(t(Delta_k - V))` by splitting
//!   products, Green operators, and the heat-content equivalence harness
//!   ([`schrodinger`]);
//! * Monte Carlo Feynman-Kac estimation over the transition chain, with
//!   cadlag path utilities ([`feynman_kac`]).
//!
//! Everything downstream of a random seed is deterministic, including under
//! thread-count changes; all stochastic entry points take explicit seeds.

pub mod error;
pub mod feynman_kac;
pub mod heat;
pub mod measure;
pub mod quad;
pub mod rootsystem;
pub mod schrodinger;

pub use error::{Error, Result};
