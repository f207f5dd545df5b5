//! Prime solutions of polynomial systems: empirical counts versus the
//! circle-method main term.
//!
//! The crate computes both sides of `M_f(X) ≈ 𝔖·μ(∞)·X^{n−D}` for small
//! systems of integer polynomials: von Mangoldt weighted brute-force counts
//! on one side, and the singular series and singular integral on the other.
//! Around that sit the structural tools: the graded-lex normal form, Birch
//! rank and h-invariant estimates, and Weyl differencing diagnostics.

pub mod arith;
pub mod cli;
pub mod compiled;
pub mod counting;
pub mod error;
pub mod harness;
pub mod invariants;
pub mod integral;
pub mod linalg;
pub mod local;
pub mod normalize;
pub mod polysys;
pub mod residue;
pub mod weyl;

pub use error::{Error, Result};
