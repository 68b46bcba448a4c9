//! Command-line front end: experiment files, named experiments and table
//! output.

pub mod config;
pub mod experiment;

pub use config::{parse_spec, ExperimentKind, ExperimentSpec, OutputFormat};
pub use experiment::{run_experiment, Cell, Table};
