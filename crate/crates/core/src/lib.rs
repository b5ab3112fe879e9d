//! Smoothly broken power laws for neural scaling curves.
//!
//! [`forms`] evaluates the broken power law and the baseline forms M1-M4,
//! [`fitting`] fits them with a grid search followed by bounded local least
//! squares, [`benchmark`] runs the train/held-out extrapolation protocol over
//! many tasks, and [`simulate`] sweeps the fit range on noiseless data.

pub mod benchmark;
pub mod error;
pub mod fitting;
pub mod forms;
pub mod json;
pub mod metrics;
pub mod plot;
pub mod series;
pub mod simulate;

pub use error::{Error, Result};
pub use fitting::{fit, FitConfig, FitResult};
pub use forms::{BnslParams, Break, FormKind, FunctionalForm, PowerLawSegment};
pub use metrics::{rmsle, root_standard_log_error, stable_msle, PredictionPair};
pub use series::{DataSeries, Sample, Split};
