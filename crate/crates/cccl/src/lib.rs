//! File formats, embedding provider client, reports and the command line for
//! the `cccl` evaluation harness. The measurement core lives in `cccl-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod fs;
pub mod provider;
pub mod report;
pub mod results;
pub mod store_io;

pub use error::{Error, FormatError, FormatErrorKind, Result};
