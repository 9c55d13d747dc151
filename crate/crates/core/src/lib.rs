//! Forecasting workbench for state-level COVID-19 case and death counts.

pub mod acts;
pub mod cli;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod optim;
pub mod preprocess;
pub mod sarima;
pub mod seir;
pub mod series;
pub mod synth;
pub mod task;

pub use error::{Error, Result};
