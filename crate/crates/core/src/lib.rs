//! Economic model predictive control of a wind turbine with multi-location
//! tower load limiting.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the bad range
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod aero;
pub mod convex;
pub mod empc;
pub mod error;
pub mod qp;
pub mod sim;
pub mod tower;
pub mod validation;

pub use error::{Error, Result};
