//! File formats, the experiment harness and the `nail` command-line tool
//! around [`nail_core`].

pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod report;
pub mod single;

pub use config::{DataSource, ExperimentConfig, MaskConfig, SolverOptions, SyntheticConfig, VariantName};
pub use error::{NailError, Result};
pub use harness::{run_experiment, run_experiment_on, CellSummary, EvalReport, RunRecord, RunStatus};
pub use report::emit_report;
