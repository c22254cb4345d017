//! Solenoidal restriction operators for small rigid bodies in an
//! incompressible fluid, and a penalized fluid-body experiment.

pub mod bogovskii;
pub mod cli;
pub mod cutoff;
pub mod error;
pub mod grid;
pub mod restriction;
pub mod fsi;
pub mod verify;

pub use error::{Error, Result};
