//! File formats, the single-run pipeline and parallel simulation sweeps
//! behind the `blocksig` command.

pub mod error;
pub mod ingest;
pub mod io;
pub mod pipeline;
pub mod sweep;

pub use error::{CliError, Result};
