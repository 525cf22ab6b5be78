//! Coupled pendulum-clock ("Huygens") models.
//!
//! The crate is `no_std` with `alloc`. It provides the parameter layers
//! ([`params`]), model right-hand sides and an adaptive 8th-order integrator
//! ([`dynamics`]), the linear theory ([`linear`]), a generic small-parameter
//! periodic-orbit engine with closed-form regime predictions ([`poincare`]),
//! and trajectory diagnostics ([`classify`]).
#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod classify;
pub mod dynamics;
pub mod error;
pub mod linear;
pub mod params;
pub mod poincare;

pub use error::{Error, Result};
