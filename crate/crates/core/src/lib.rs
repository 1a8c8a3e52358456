//! Wave-domain beamforming for stacked intelligent metasurface (SIM) MIMO links.
//!
//! The crate models a point-to-point link in which both transceivers are fitted
//! with a stack of programmable metasurface layers. Precoding and combining
//! happen entirely in the wave domain, one data stream per antenna pair, and
//! the free variables are the unit-modulus meta-atom coefficients plus the
//! per-stream transmit power.
//!
//! Modules, bottom-up:
//! - [`geometry`]: physical layout and Rayleigh-Sommerfeld propagation matrices.
//! - [`channel`]: spatially correlated Rayleigh channel between the two SIMs.
//! - [`cascade`]: SIM cascades, the effective channel, rate and interference.
//! - [`power`]: WMMSE and water-filling power allocation.
//! - [`rmax`]: rate maximization by Riemannian BFGS + WMMSE alternation.
//! - [`imin`]: interference minimization by closed-form coordinate descent.
//! - [`harness`]: hybrid pipeline, Monte-Carlo sweeps, self-check, CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod imin;
pub mod linalg;
pub mod power;
pub mod rmax;
pub mod solution;

pub use error::{Result, SimError};
pub use linalg::{CMat, CVec, C64};
