//! Viscosity solutions of Hamilton-Jacobi Cauchy problems
//! `u_t + H(t, x, D_x u) = 0`, `u(0, .) = u0`, through the variational formula
//! `u(t, x) = min_y [u0(y) + A_t(y, x)]`.
//!
//! The crate evaluates solutions, detects singular points by counting tied
//! minimizers, traces classical and generalized characteristics, and tests
//! proximal subgradients of the initial datum.

// `!(a > b)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod chartrace;
pub mod datum;
pub mod error;
pub mod flow;
pub mod hamiltonian;
pub mod io;
pub mod problem;
pub mod scenarios;
pub mod subdiff;
pub mod value;
pub mod vecops;

pub use error::{Error, Result};
