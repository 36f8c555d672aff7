//! Regret experiments: configured grids of (horizon, seed, algorithm) cells,
//! scaling fits, CSV tables and SVG plots.

pub mod config;
pub mod fit;
pub mod io;
pub mod plot;
pub mod runner;

pub use config::{AlgorithmConfig, BudgetSchedule, EnvironmentConfig, ExperimentConfig, OracleConfig};
pub use fit::{fit_scaling_slope, scaling_samples, Against, ScalingFit};
pub use io::{write_fits_csv, write_records_csv, write_traces, RECORD_COLUMNS};
pub use plot::{emit_plot, Plot};
pub use runner::{run_cells, run_cells_with, workers_from_env, RegretRecord, Trace, WORKERS_ENV};
