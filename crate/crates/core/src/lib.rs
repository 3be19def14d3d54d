//! Metropolized sampling kernels and the targets that break them.
//!
//! This crate implements the MALA and multi-step leapfrog HMC Markov chains
//! together with a family of adversarial well-conditioned targets (all with
//! Hessian eigenvalues pinned to `[1, kappa]`) on which those chains provably
//! mix slowly. The point is not to sample well; it is to make the failure
//! modes measurable at desk scale:
//!
//! * acceptance collapse of MALA started from bad sets of stationary measure
//!   `exp(-d)`, on a hard Gaussian and on a cosine-perturbed potential;
//! * resonance traps where the leapfrog position map reduces to a Chebyshev
//!   polynomial evaluated at an extremal point, freezing a coordinate exactly;
//! * step-size-limited spectral gaps, witnessed by the first-coordinate
//!   Dirichlet form;
//! * warm-start mixing stalls where the filter never rejects and the chain
//!   still goes nowhere.
//!
//! Module layout follows the pipeline: [`targets`] builds potentials,
//! [`kernels`] runs chains on them, [`chebyshev`] holds the polynomial closed
//! form of leapfrog dynamics on quadratics, [`analysis`] has the exact
//! acceptance identities, [`estimators`] measures gaps, set measures, escape
//! probabilities and TV witness bounds, and [`identities`] bundles the exact
//! checks into a reportable suite. All randomness flows through [`rng`],
//! which gives every draw a reproducible address.
//!
//! The `book/` directory of the repository is a narrative guide to the same
//! material; its code snippets compile and run as this crate's doc-tests (see
//! [`guide`]).

// `!(x > 0.0)` rejects NaN along with nonpositives; `x <= 0.0` would not.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod chebyshev;
pub mod estimators;
pub mod experiments;
pub mod identities;
pub mod kernels;
pub mod rng;
pub mod targets;

pub mod guide;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A constructor or operation was handed parameters outside its domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The chain or an evaluator produced a non-finite value.
    #[error("non-finite value at step {step}: {context}")]
    NonFinite { step: u64, context: String },
    /// A sampler guard tripped; proceeding would bias results.
    #[error("sampler guard: {0}")]
    Guard(String),
    /// Adaptive quadrature failed to converge.
    #[error("quadrature did not converge within {levels} refinement levels")]
    Quadrature { levels: usize },
    /// A rejection sampler ran out of attempts.
    #[error("sampler exhausted after {attempts} attempts: {context}")]
    Exhausted { attempts: u64, context: String },
    /// A point's dimension does not match the set or target.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
