//! Recovery of a structured signal and a structured corruption from
//! corrupted non-linear Gaussian measurements `y = f(Φx⋆) + √m·v⋆`.
//!
//! The crate covers the whole pipeline: link functions and their
//! nonlinearity parameters ([`links`]), structure sets and projections
//! ([`sets`]), instance synthesis ([`model`]), the constrained least-squares
//! solver ([`solver`]), Monte Carlo Gaussian-width geometry ([`geometry`])
//! and seeded experiment sweeps ([`experiments`]).

// `!(x > 0.0)` is used on purpose so NaN lands in the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod geometry;
pub mod links;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod sets;
pub mod solver;

pub use error::{Error, Result};
pub use links::{apply_link, estimate_psi, link_params, LinkFunction, NonlinearityParams};
pub use model::{generate_instance, residual, InstanceSpec, ProblemInstance};
pub use sets::ConstraintSet;
pub use solver::{joint_error, lipschitz_estimate, solve_tlasso, SolveOptions, SolveResult, StepRule};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
