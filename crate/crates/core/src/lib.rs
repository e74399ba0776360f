//! Two-phase human-robot cooperation: optimal impedance-reference generation
//! followed by neuro-adaptive joint tracking on a planar 2-link arm.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod controller;
pub mod error;
pub mod integrator;
pub mod interaction;
pub mod manipulator;
pub mod output;
pub mod riccati;
pub mod simulation;
pub mod transcription;
pub mod verify;

pub use error::{Error, ErrorCategory, Result};
