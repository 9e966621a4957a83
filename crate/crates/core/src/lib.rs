//! Concentration bounds for infinitely divisible vectors with independent
//! components.
//!
//! The crate computes Chernoff-type tail bounds `P(f(X) ≥ m + x) ≤ e^{-E(x)}`
//! for Lipschitz functionals `f` of a vector `X ~ ID(γ, 0, ν)` whose Lévy
//! measure lives on the coordinate axes, samples such vectors, and checks the
//! bounds against Monte Carlo tail frequencies with exact binomial
//! confidence limits.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod chi;
pub mod cli;
pub mod coupling;
pub mod error;
pub mod functionals;
pub mod id_model;
pub mod levy;
pub mod quad;
pub mod samplers;
pub mod stats;
pub mod verifier;

pub use error::{Error, Result};
pub use functionals::{Functional, FunctionalEnvelope};
pub use id_model::{Component, IdVectorModel, NormBracket};
pub use levy::{Atom, LevyMeasure1D};
