//! Learning reduced models of polynomial dynamical systems with operator
//! inference on re-projected trajectories.
//!
//! The crate is organised bottom-up:
//!
//! - [`polytensor`]: compressed Kronecker powers and their monomial ordering.
//! - [`fom`]: full-order polynomial systems, benchmark discretizations and
//!   time stepping.
//! - [`subspace`]: POD bases, projection and lifting.
//! - [`rom`]: reduced polynomial models, Galerkin projection, truncation and
//!   parameter interpolation.
//! - [`opinf`]: data matrices, re-projection sampling, least-squares operator
//!   inference and recovery certificates.
//! - [`diagnostics`]: error metrics, closure error and the Mori-Zwanzig split
//!   of projected linear dynamics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod fom;
pub mod linalg;
pub mod opinf;
pub mod polytensor;
pub mod rom;
pub mod subspace;

pub use error::{Error, Result};
