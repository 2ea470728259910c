//! Annealed variational Bayes for finite Gaussian mixtures with
//! simultaneous covariate selection.
//!
//! The model clusters N observations of J covariates with a diagonal
//! Gaussian mixture while a binary indicator per covariate decides whether
//! it carries cluster structure or is explained by a single null Gaussian.
//! Inference is coordinate-ascent variational Bayes, optionally tempered by
//! a [`TemperatureSchedule`].
//!
//! ```no_run
//! use vbvarsel::{fit, Hyperparameters, SyntheticSpec, TemperatureSchedule};
//!
//! let dataset = SyntheticSpec::base(100, 200, 0.1, 1).generate().unwrap();
//! let hyper = Hyperparameters::synthetic(dataset.data.j());
//! let result = fit(&dataset.data, &hyper, &TemperatureSchedule::untempered(), 7).unwrap();
//! println!("{} clusters", result.effective_k);
//! ```

pub mod engine;
pub mod error;
pub mod eval;
pub mod model;
pub mod schedule;
pub mod special;
pub mod synthdata;

pub use engine::{fit, FitResult};
pub use error::{Result, VbError};
pub use eval::{
    adjusted_rand_index, aggregate, fisher_enrichment, selection_metrics, EvalError, Quartiles,
    RepetitionRecord, RepetitionSummary,
};
pub use model::{
    fit_null_params, init_state, standardize, DataMatrix, Hyperparameters, NullParams,
    VariationalState,
};
pub use schedule::{ScheduleKind, TemperatureSchedule};
pub use synthdata::{Correlation, Misspecification, SyntheticDataset, SyntheticSpec};
