//! Experiment harness around `gapgrad-core`: configs, runs, reports, plots
//! and the command line.

pub mod config;
pub mod fft;
pub mod io;
pub mod plot;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind};
pub use gapgrad_core::regression::{fit_loglog, RateFit};
pub use report::{ReportBundle, Verdict};
pub use run::{make_solver, run_experiment};
