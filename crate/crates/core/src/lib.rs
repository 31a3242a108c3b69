//! Simulation and analysis toolkit for wavelength-multiplexed,
//! entanglement-based QKD over long fiber links.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod detection;
pub mod error;
pub mod link;
pub mod optimizer;
pub mod presets;
pub mod scenario;
pub mod security;
pub mod simulate;
pub mod source;
pub mod timetag;
pub mod units;

pub use error::{Error, Result};
