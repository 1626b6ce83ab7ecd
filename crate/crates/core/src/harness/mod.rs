//! Declarative experiments: config files, parallel runs with checkpointing,
//! record files, and the analyses built on them.

pub mod analyze;
pub mod config;
pub mod probes;
pub mod record;
pub mod run;

pub use analyze::{analyze, summarize, Report};
pub use config::{Budget, ExperimentConfig, GridPoint, Kind};
pub use record::{ExperimentRecord, ParsedRecord};
pub use run::{run, run_with, RunOptions, RunOutcome};
