//! One-dimension-at-a-time experiment protocol: grids, baselines, normalized improvement
//! and variation, and the NDJSON run store.

mod attribution;
mod config;
mod run;
mod store;

pub use attribution::{
    attribution_report, hyper_baseline, improvement, normalize_scores, select_baseline, variation, AttributionReport,
    AttributionRow, Baseline, Bounds, Normalized, Quantity, RegionBaselines, NORMALIZATION_SCOPE,
};
pub use config::{Dimension, ExperimentGrid, Family, ModelConfig};
pub use run::{
    derive_seed, expected_records, run_dimension, run_experiment, seir_forecast, ExperimentOutcome, Forecaster,
    ModelForecaster, RunOptions, Settings, StubForecaster,
};
pub use store::{read_records, write_records, RunRecord, RunStatus, RunStore, RUNS_FILE, STORE_SCHEMA, TIMINGS_FILE};
