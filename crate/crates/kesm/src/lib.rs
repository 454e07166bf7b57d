//! File formats, a parallel executor and the `kesm` command line on top of
//! [`kesm_core`].

pub mod cli;
mod error;
pub mod exec;
pub mod formats;
pub mod io;
pub mod manifest;

pub use error::{Error, Result};
