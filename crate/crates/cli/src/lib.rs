//! File formats, configuration, and subcommands of the `fmd` tool.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod pgm;

pub use commands::{cmd_bench, cmd_decompose, cmd_eval, cmd_gen, cmd_train, BenchReport, EvalRow, Sweep};
pub use config::RunConfig;
pub use dataset::DatasetFile;
pub use error::{CliError, Result};
