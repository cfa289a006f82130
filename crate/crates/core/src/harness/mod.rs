//! Experiment orchestration, metrics and file output.

pub mod experiment;
pub mod io;
pub mod metrics;
pub mod plot;
pub mod reproduce;

pub use experiment::{run_experiment, ExperimentConfig, MechanismSpec, MetricsRow, Seeds};
pub use metrics::{clearing_error, efficiency, r_squared, r_squared_centered};
pub use reproduce::{reproduce_examples, ExamplesReport};
