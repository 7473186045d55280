//! Joint resource-block assignment, transmit power control and UAV placement
//! for URLLC users served by a UAV base station.
//!
//! - [`channel`]: path gain, Rician fading and the finite-blocklength rate.
//! - [`traffic`]: sliding-window Gaussian-process load prediction.
//! - [`optimizer`]: block coordinate ascent over assignment, power and position.
//! - [`sim`]: scenarios, baselines and Monte Carlo sweeps.

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channel;
pub mod error;
pub mod optimizer;
mod serde_rows;
pub mod sim;
pub mod traffic;

pub use error::{Error, Result};
