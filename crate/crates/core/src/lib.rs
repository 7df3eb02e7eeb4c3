//! Simulation and receiver toolkit for frequency-shifted analog backscatter
//! tags.
//!
//! The crate is organized bottom-up: [`circuit`] holds the oscillator tank
//! math, [`tag`] turns a tag plus an interaction script into an instantaneous
//! frequency track, [`channel`] synthesizes receiver IQ from those tracks,
//! [`dsp`] is the receiver signal chain and [`decode`] turns the DSP output
//! into interaction events. [`scenario`], [`formats`] and [`pipeline`] back
//! the command-line harness.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod channel;
pub mod circuit;
pub mod decode;
pub mod dsp;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod presets;
pub mod scenario;
pub mod tables;
pub mod tag;
pub mod units;

pub use error::{Error, Result};
