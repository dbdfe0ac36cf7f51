//! Config-driven benchmark sweeps over the `dpsynth` synthesizers: every
//! model at every privacy level and dataset size, repeated `m` fits by `s`
//! samples, with timing and CSV reports.

pub mod config;
pub mod metrics;
pub mod report;
pub mod runner;

pub use config::{DatasetConfig, Epsilon, ExperimentConfig, SchemaConfig, Sweep, SweepAxis};
pub use metrics::MetricContext;
pub use report::{emit_csv, format_sig, write_csv, PointStatus, ReportRow};
pub use runner::{
    prepare_data, run_experiment, run_experiment_with_jobs, sample_seed, time_section, Timing,
};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Data(#[from] dpsynth::Error),
}
