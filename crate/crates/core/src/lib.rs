//! Simulation and analysis toolkit for optical addressing of trapped-ion
//! chains with laser-written waveguide chips.

pub mod analysis;
pub mod chain;
pub mod chip;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod linalg;
pub mod modes;
pub mod propagation;
pub mod sensor;

pub use error::{Error, Result};
