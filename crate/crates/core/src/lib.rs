//! Exact computation of sandpile groups and cokernels of random symmetric
//! integer matrices, together with their limiting Sylow distributions.
//!
//! The crate is split along the pipeline of a typical experiment:
//!
//! * [`abelian`] — partitions, finite abelian groups, and all counting
//!   formulas (homomorphisms, automorphisms, perfect symmetric pairings,
//!   surjections, subgroup counts), plus exhaustive small-group oracles.
//! * [`linalg`] — Smith normal form over the integers and over `Z/p^e`,
//!   cokernel Sylow-type extraction with saturation certificates, and
//!   `F_p` rank.
//! * [`models`] — seeded, counter-based samplers for Erdős–Rényi graphs
//!   and symmetric integer matrices, and sandpile/cokernel type extraction.
//! * [`theory`] — closed-form limiting probabilities, bounds, and constants.
//! * [`recover`] — inversion of the truncated moment problem via the
//!   lexicographic triangular solve built from analytic-function
//!   coefficient tables.
//!
//! The crate is `no_std` (with `alloc`); all IO, serialization, and the
//! experiment harness live in the companion CLI crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod abelian;
pub mod linalg;
pub mod models;
pub mod recover;
pub mod theory;

pub use abelian::{GroupSpec, Partition};
