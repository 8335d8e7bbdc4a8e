//! Optimal high-degree stability polynomials for explicit Runge-Kutta methods.
//!
//! Stability polynomials are parametrized by their *pseudo-extrema*, the roots of
//! `(P(z) - 1) / z`. This keeps the representation well conditioned for degrees far
//! beyond what monomial coefficients allow. The crate covers the whole pipeline:
//!
//! - [`spectra`]: load, generate and reduce eigenvalue spectra of semidiscretizations.
//! - [`envelope`]: convex hulls, alpha shapes and the piecewise-linear interpolants
//!   used to place pseudo-extrema.
//! - [`polynomial`]: factorized evaluation, exact gradients, order constraints and
//!   closed-form reference polynomials.
//! - [`optimizer`]: the two-stage feasibility solve and the outer timestep search.
//! - [`rk`]: many-stage Runge-Kutta schemes in modified Shu-Osher form, internal
//!   stability and SSP analysis.
//! - [`mol`]: a small method-of-lines harness for convergence studies.

// `!(x > 0.0)` style checks are used on purpose to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod envelope;
pub mod error;
pub mod exec;
pub mod mol;
pub mod optimizer;
pub mod polynomial;
pub mod rk;
pub mod spectra;

pub use error::{Error, Result};
pub use num_complex::Complex64;
