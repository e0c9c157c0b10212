//! Numerical laboratory for the transport equation
//! `du/dt + H . grad u + p u = 0`.

pub mod carleman;
pub mod cli;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod grid;
pub mod inverse;
pub mod io;
pub mod random;
pub mod transport;

pub use error::{Error, Result};
