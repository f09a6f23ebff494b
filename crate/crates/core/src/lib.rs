//! Finite-difference simulator for the coupled spin drift-diffusion,
//! Maxwell and Landau-Lifshitz-Gilbert system in two dimensions.

pub mod check;
pub mod config;
pub mod coupling;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod grid;
pub mod linsolve;
pub mod llg;
pub mod macrospin;
pub mod maxwell;
pub mod mms;
pub mod output;
pub mod presets;
pub mod regularization;
pub mod runner;
pub mod state;
pub mod transport;

pub use error::{Error, Result};
