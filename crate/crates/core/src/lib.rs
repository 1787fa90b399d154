//! Partial critical points of saddle-structured variational systems
//! `u = N_u(u, v)`, `−v = N_v(u, v)` by alternating approximate minimization
//! and maximization of the partial functionals.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hilbert;
pub mod hypotheses;
pub mod oracle;
pub mod problems;
pub mod scheme;
pub mod zeromatrix;

pub use error::{Error, Result};
