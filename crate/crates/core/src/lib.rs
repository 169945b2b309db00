//! Quasi-adiabatic ramp design and cat-state preparation for trapped-ion
//! spin models.
//!
//! Units: hbar = 1, energies and fields in rad/ms, times in ms. A frequency
//! quoted as `f` kHz with a `/(2 pi)` enters as `2 pi f`.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod lab;
pub mod schedule;

pub use error::{Error, Result};
