//! Markov quantum dynamics, detailed balance and two-time measurement
//! entropy statistics on finite-dimensional Hilbert spaces.

// `!(x >= 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod detailed_balance;
pub mod entropy;
pub mod error;
pub mod lindblad;
pub mod operator;
pub mod qrm;
pub mod quadrature;
pub mod random;
pub mod two_time;

pub use error::{Error, Result};
