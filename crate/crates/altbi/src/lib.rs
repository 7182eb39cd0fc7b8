//! Experiment harness around `altbi-core`: TOML configuration, seeded
//! Monte-Carlo campaigns, CSV output, and the `altbi` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod csv_io;
mod error;
pub mod experiment;
pub mod gradcheck;
pub mod output;

pub use config::{Algorithm, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use experiment::{run_experiment, Aggregate, Campaign, RunMetrics, RunOutcome, RunReport};
pub use output::emit_csv;
