//! Regression of human difficulty judgments on effort and risk.
//!
//! Responses are z-scored per participant and averaged per trial, then
//! explained by the full model `b0 + b1 E (1 - R) + b2 E R` or by effort or
//! risk alone. [`grid`] picks the perturbation noise level and [`bootstrap`]
//! compares models by resampling participants.

pub mod bootstrap;
pub mod dataset;
pub mod grid;
pub mod regress;
pub mod report;

pub use bootstrap::{bootstrap_compare, bootstrap_with_resamples, BootstrapReport};
pub use dataset::{zscore, zscore_and_average, HumanDataset};
pub use grid::{dataset_targets, default_grid, grid_risks, grid_search_sigma, parse_grid, select_sigma, GridPoint, GridSearch};
pub use regress::{fit_effort_only, fit_full, fit_model, fit_risk_only, pearson, ModelFit, ModelKind};
pub use report::{compare_datasets, fit_dataset, fit_datasets, DatasetFits, FitReport};
