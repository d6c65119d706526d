//! Command-line runner for the legal retrieval and entailment pipelines.
//!
//! - [`config`]: the flat `key=value` run configuration.
//! - [`run`]: validation, task dispatch, atomic artifact writes and the run
//!   manifest.
//! - [`synth`]: the synthetic corpus generator used in place of licensed data.
//! - [`app`]: the clap command tree behind the `legalir` binary.

pub mod app;
pub mod config;
pub mod run;
pub mod synth;
pub mod tasks;

mod error;

pub use config::{ConfigMode, RunConfig, Task};
pub use error::CliError;
pub use run::{execute, write_atomic, RunManifest, RunOutcome};
pub use synth::{generate_synthetic, GoldLedger, SyntheticCorpus, SyntheticSpec};
