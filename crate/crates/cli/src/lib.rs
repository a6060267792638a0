//! Command-line runner: TOML config in, results tables, plots and a run
//! manifest out.

pub mod config;
pub mod oracle;
pub mod output;
pub mod pipeline;
pub mod plot;

pub use config::{Overrides, RunConfig, SchemaError};
pub use pipeline::{run, RunError, RunOutput};
