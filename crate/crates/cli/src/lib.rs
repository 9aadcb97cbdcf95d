//! Config-driven experiment runner for `tangent-core`.
//!
//! A JSON config names a jump process, a basis and one experiment. [`run`]
//! validates it, draws whatever randomness the experiment needs from streams
//! keyed by the config seed, and returns a [`Report`] whose checks decide the
//! exit status.

pub mod config;
pub mod error;
pub mod report;
pub mod run;
pub mod suite;

pub use config::{validate, ExperimentConfig};
pub use error::{CliError, EXIT_ERROR, EXIT_FAIL, EXIT_PASS};
pub use report::{emit, Check, Format, Report, CSV_HEADER};
pub use run::{run, RunOptions};
pub use suite::{run_suite, SuiteSummary};
