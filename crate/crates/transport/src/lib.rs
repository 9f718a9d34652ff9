//! File formats, the parallel experiment runner and the command line front
//! end for `transport-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod output;
pub mod runner;

pub use error::{AppError, AppResult};
