//! Finite-SNR capacity bounds for noncoherent Rayleigh block-fading
//! multiple-access channels.

// NaN-rejecting guards are written as !(x > 0.0) on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity_lb;
pub mod capacity_ub;
pub mod config;
pub mod detkit;
pub mod error;
pub mod randmat;
pub mod specfn;
pub mod sweep;

pub use error::{Error, Result};
