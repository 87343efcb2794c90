//! Numerics for first-order matrix dynamic equations on time scales.
//!
//! The crate covers the calculus layer (jump operators, delta-derivatives
//! and integrals on bounded time scales), a dense-matrix utility layer
//! (definiteness, the Loewner order, the regressive circle algebra), the
//! generalized matrix exponential, IVP solvers for the explicit and sigma
//! forms, and a sampling certifier for matrix Lipschitz-type uniqueness
//! hypotheses.

pub mod certifier;
pub mod config;
pub mod curve;
pub mod error;
pub mod expr;
pub mod field;
pub mod matrix;
pub mod solver;
pub mod timescale;
pub mod tsexp;

pub use curve::MatrixCurve;
pub use error::{Error, Result};
pub use field::MatrixField;
pub use matrix::{Matrix, Tolerances};
pub use timescale::{GridSpec, TimeScale};
