//! File formats, the evaluation pipeline and the `unravel` command line on
//! top of `unravel-core`.

pub mod cli;
pub mod error;
pub mod model_io;
pub mod pipeline;
pub mod query_io;
pub mod report;
pub mod tsv;

pub use error::{CliError, Result};
