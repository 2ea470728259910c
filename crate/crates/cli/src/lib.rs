//! Front end for `vbvarsel`: CSV ingestion, flat key-value configuration,
//! the repetition harness and canned reproductions of the published
//! simulation tables.

pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod reproduce;

pub use config::{
    DataSource, ModelConfig, PriorMean, PriorScale, RawConfig, RunConfig, SimulationConfig,
};
pub use error::{CliError, Result};
pub use experiment::{run_experiment, simulate, ExperimentOutput, LabelledData};
pub use io::{load_csv, load_csv_with, HeaderMode};
pub use reproduce::{canned_table, reproduce, Report, ReproduceOptions};
