//! Synthetic data, CSV ingestion and the Monte Carlo harness.

pub mod config;
pub mod coverage;
pub mod data_io;
pub mod generate;
pub mod gtable;
pub mod mse;

pub use config::ExperimentConfig;
pub use coverage::{coverage_check, CoverageConfig, CoverageReport};
pub use data_io::{load_csv, write_csv, CsvSchema, LoadReport, Strictness};
pub use generate::{generate, CovariateLaw, GeneratorSpec, ModelKind, ThetaRule};
pub use gtable::{g_table, GTable};
pub use mse::{monte_carlo_mse, Method, MseTable};
