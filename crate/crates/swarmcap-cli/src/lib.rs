//! Library surface of the command-line front end: config parsing, sweep
//! execution, and result summarizing. The `swarmcap` binary is a thin
//! wrapper over these.

pub mod config;
pub mod execute;
pub mod summarize;

pub use config::{build_spec, parse_config, ConfigError, ExperimentSpec, FileConfig, Overrides};
pub use execute::{execute, ExecuteError, ExecuteReport, RunRow, SampleRow, SummaryRow};
pub use summarize::{summarize, SummarizeError};
