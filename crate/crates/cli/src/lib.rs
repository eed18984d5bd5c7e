//! Batch harness around `ricci_lab_core`: configuration files, checks with
//! verdicts, JSON and CSV reports, refinement sweeps and plot scripts.

pub mod checks;
pub mod config;
pub mod error;
pub mod report;
pub mod run;

pub use checks::{CheckReport, Evaluation, Norms, Verdict};
pub use config::{CheckName, ExperimentConfig, ReferenceChoice};
pub use error::HarnessError;
pub use report::{ConvergenceTable, ResidualReport, SeriesRow, CSV_HEADER};
pub use run::{emit_plots, refine_sweep, run, RunOutput};
