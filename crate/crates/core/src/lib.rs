//! Energy-efficient multicast precoding for multibeam satellite downlinks.
//!
//! The crate is `no_std` + `alloc`. It covers:
//!
//! - [`channel`]: synthetic multibeam channels `H = Φ·C` from satellite/user
//!   geometry and a tapered-aperture feed pattern.
//! - [`metrics`]: multicast SINR, worst-user rates, energy efficiency and
//!   constraint audits for any precoder.
//! - [`cone`] and [`subproblem`]: a small canonical cone-program
//!   representation and the builders for the fractional (Charnes-Cooper)
//!   subproblem and the slack-penalized restoration problem.
//! - [`precoder`]: the successive convex approximation loop.
//! - [`baselines`]: RZF, MMSE and an MBIM-style two-stage precoder.
//!
//! Cone programs are solved through the [`cone::ConeSolver`] trait. The
//! `clarabel` feature (on by default, requires `std`) provides an
//! interior-point backend; without it callers supply their own solver.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod baselines;
pub mod channel;
pub mod cone;
mod error;
pub mod linalg;
mod math;
pub mod metrics;
pub mod precoder;
pub mod subproblem;

#[cfg(feature = "clarabel")]
pub mod clarabel_backend;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Converts a power in dBW to watts.
pub fn dbw_to_watts(dbw: f64) -> f64 {
    math::powf(10.0, dbw / 10.0)
}

/// Converts a power in watts to dBW.
pub fn watts_to_dbw(watts: f64) -> f64 {
    10.0 * math::log10(watts)
}

/// Converts a dB ratio (dBi, dB) to a linear factor.
pub fn db_to_linear(db: f64) -> f64 {
    math::powf(10.0, db / 10.0)
}
