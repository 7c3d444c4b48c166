//! Command-line front end and file formats for `vixlab-core`.

pub mod cli;
mod error;
pub mod exec;
pub mod io;
pub mod run;
pub mod scenario;

pub use error::{Error, Result};
pub use vixlab_core as core;
