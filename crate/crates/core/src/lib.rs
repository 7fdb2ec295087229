//! Radially symmetric stationary flows of a viscous, heat-conductive ideal
//! gas in the exterior of the unit ball.
//!
//! The crate is `no_std` (with `alloc`): every numerical routine is a pure
//! function of its inputs, so the same code serves the command-line front
//! end, the test suites and embedded callers.

#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN is rejected along with
// non-positive values; index loops mirror the banded and stencil algebra.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod banded;
pub mod bvp;
pub mod fixedpoint;
pub mod functionals;
pub mod grid;
pub mod math;
pub mod model;
pub mod quadrature;
