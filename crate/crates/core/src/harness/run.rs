use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::attribution::hyper_baseline;
use super::config::{Dimension, ExperimentGrid, Family, ModelConfig};
use super::store::{RunRecord, RunStatus, RunStore, STORE_SCHEMA};
use crate::acts::{self, ActsData, ActsHyper};
use crate::error::{Error, Result};
use crate::ingest::{build_task_dataset, Snapshot, TaskDataset};
use crate::metrics::evaluate;
use crate::sarima::{self, FitOptions};
use crate::seir::{self, FitContext, SeirFitOptions};
use crate::task::{ForecastTask, Region, Target, TaskKind, WindowPolicy};

/// Produces forecasts for a configuration. Joint families receive every region's dataset
/// at once; others receive one.
pub trait Forecaster: Sync {
    fn forecast(&self, config: &ModelConfig, datasets: &[&TaskDataset], seed: u64) -> Vec<Result<Vec<f64>>>;

    /// Whether the family trains on all regions together.
    fn joint(&self, family: Family) -> bool {
        family == Family::Acts
    }
}

/// The real model families.
#[derive(Debug, Clone, Copy)]
pub struct ModelForecaster {
    pub sarima_max_iter: usize,
    pub seir_max_iter: usize,
}

impl Default for ModelForecaster {
    fn default() -> Self {
        Self {
            sarima_max_iter: FitOptions::default().max_iter,
            seir_max_iter: SeirFitOptions::default().max_iter,
        }
    }
}

fn cumulative(daily: &[f64]) -> Vec<f64> {
    daily
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

/// SEIR-HCD fit on both cumulative curves from one start, then the target's daily forecast.
pub fn seir_forecast(ds: &TaskDataset, start: &seir::SeirHcdParams, max_iter: usize) -> Result<Vec<f64>> {
    let conf = cumulative(ds.train_of(Target::Confirmed).values());
    let death = cumulative(ds.train_of(Target::Death).values());
    let ctx = FitContext::new(ds.population);
    let opts = SeirFitOptions {
        max_iter,
        parallel: false,
    };
    let fit = seir::fit(&conf, &death, &ctx, std::slice::from_ref(start), &opts)?;
    let (c, d) = seir::forecast(&fit.params, fit.final_state, ds.population, ds.task.horizon.days())?;
    Ok(match ds.task.target {
        Target::Confirmed => c,
        Target::Death => d,
    })
}

impl Forecaster for ModelForecaster {
    fn forecast(&self, config: &ModelConfig, datasets: &[&TaskDataset], seed: u64) -> Vec<Result<Vec<f64>>> {
        match config {
            ModelConfig::Sarima { order } => datasets
                .iter()
                .map(|ds| {
                    let opts = FitOptions {
                        seed,
                        max_iter: self.sarima_max_iter,
                        ..FitOptions::default()
                    };
                    sarima::fit_and_forecast(ds.train.values(), *order, ds.task.horizon.days(), &opts).map(|(_, f)| f)
                })
                .collect(),
            ModelConfig::SeirHcd { start } => datasets
                .iter()
                .map(|ds| seir_forecast(ds, start, self.seir_max_iter))
                .collect(),
            ModelConfig::Acts { epochs, hidden, rate } => {
                let Some(first) = datasets.first() else {
                    return Vec::new();
                };
                let hyper = ActsHyper::new(*epochs, *hidden, *rate, first.task.horizon.days()).with_seed(seed);
                let series: Vec<_> = datasets.iter().map(|d| d.train.clone()).collect();
                let trained = ActsData::from_series(&series).and_then(|data| Ok((acts::train(&data, &hyper)?, data)));
                match trained {
                    Ok((model, data)) => (0..datasets.len()).map(|i| acts::forecast(&model, &data, i)).collect(),
                    Err(e) => {
                        let msg = e.to_string();
                        datasets.iter().map(|_| Err(Error::FitFailed(msg.clone()))).collect()
                    }
                }
            }
        }
    }
}

type Offset = dyn Fn(&ModelConfig, &ForecastTask) -> f64 + Sync + Send;

/// Deterministic stand-in: forecasts the realized test values plus a per-run offset, so
/// MAE equals the offset exactly. A non-finite offset reports a fit failure.
pub struct StubForecaster {
    offset: Box<Offset>,
}

impl StubForecaster {
    pub fn new(offset: impl Fn(&ModelConfig, &ForecastTask) -> f64 + Sync + Send + 'static) -> Self {
        Self {
            offset: Box::new(offset),
        }
    }

    /// Offsets derived from a hash of the configuration and window, in `[0, 50)`.
    pub fn hashed() -> Self {
        Self::new(|config, task| {
            let h = derive_seed(
                0,
                &[
                    &config.key(),
                    task.window.as_str(),
                    &task.kind().code(),
                    task.region.code(),
                ],
            );
            (h % 5000) as f64 / 100.0
        })
    }
}

impl Forecaster for StubForecaster {
    fn forecast(&self, config: &ModelConfig, datasets: &[&TaskDataset], _seed: u64) -> Vec<Result<Vec<f64>>> {
        datasets
            .iter()
            .map(|ds| {
                let c = (self.offset)(config, &ds.task);
                if !c.is_finite() {
                    return Err(Error::FitFailed("stub failure".into()));
                }
                Ok(ds.test.values().iter().map(|y| (y + c).max(0.0)).collect())
            })
            .collect()
    }
}

/// Stable per-run seed: SHA-256 over the base seed and the run's identifying parts.
pub fn derive_seed(base: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    for p in parts {
        h.update(p.as_bytes());
        h.update([0x1f]);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// A configuration and training window.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub config: ModelConfig,
    pub window: WindowPolicy,
}

#[derive(Debug, Clone)]
struct Unit {
    config: ModelConfig,
    kind: TaskKind,
    window: WindowPolicy,
    /// Regions whose datasets feed the fit.
    inputs: Vec<Region>,
    /// Regions that get a record.
    emit: Vec<Region>,
}

#[derive(Clone, Default)]
pub struct RunOptions {
    pub jobs: usize,
    pub seed: u64,
    pub cancel: Option<Arc<AtomicBool>>,
}

impl RunOptions {
    pub fn new(jobs: usize, seed: u64) -> Self {
        Self {
            jobs,
            seed,
            cancel: None,
        }
    }

    fn cancelled(&self) -> bool {
        self.cancel.as_ref().is_some_and(|c| c.load(Ordering::SeqCst))
    }
}

struct Datasets(BTreeMap<ForecastTask, std::result::Result<TaskDataset, String>>);

impl Datasets {
    fn build(snapshot: &Snapshot, tasks: impl IntoIterator<Item = ForecastTask>) -> Self {
        Self(
            tasks
                .into_iter()
                .map(|t| (t, build_task_dataset(snapshot, t).map_err(|e| e.to_string())))
                .collect(),
        )
    }
}

fn unit_seed(base: u64, unit: &Unit, region: Option<Region>) -> u64 {
    let kind = unit.kind.code();
    let region = region.map(|r| r.code()).unwrap_or("*");
    derive_seed(base, &[&kind, region, unit.window.as_str(), &unit.config.key()])
}

fn record(
    task: ForecastTask,
    config: &ModelConfig,
    seed: u64,
    outcome: Result<Vec<f64>>,
    test: Option<&[f64]>,
) -> RunRecord {
    let mut rec = RunRecord {
        schema: STORE_SCHEMA,
        task,
        config: config.clone(),
        window_policy: task.window,
        seed,
        status: RunStatus::FitFailed,
        report: None,
        forecast: Vec::new(),
        error: None,
        wall_time: 0.0,
    };
    match (outcome, test) {
        (Ok(f), Some(test)) => match evaluate(test, &f) {
            Ok(report) => {
                rec.status = if report.valid {
                    RunStatus::Ok
                } else {
                    RunStatus::InvalidMetrics
                };
                rec.report = Some(report);
                rec.forecast = f;
            }
            Err(e) => {
                rec.status = RunStatus::InvalidMetrics;
                rec.error = Some(e.to_string());
                rec.forecast = f;
            }
        },
        (Ok(_), None) => rec.error = Some("missing test data".into()),
        (Err(e), _) => rec.error = Some(e.to_string()),
    }
    rec
}

fn execute(unit: &Unit, data: &Datasets, forecaster: &dyn Forecaster, base: u64) -> Vec<RunRecord> {
    let started = Instant::now();
    let task = |r: Region| ForecastTask::new(r, unit.kind.target, unit.kind.horizon, unit.window);
    let joint = unit.inputs.len() > 1 || forecaster.joint(unit.config.family());
    let seed = unit_seed(base, unit, if joint { None } else { unit.emit.first().copied() });
    let mut inputs = Vec::new();
    let mut missing = None;
    for r in &unit.inputs {
        match &data.0[&task(*r)] {
            Ok(ds) => inputs.push(ds),
            Err(e) => missing = Some(e.clone()),
        }
    }
    let outcomes: Vec<Result<Vec<f64>>> = match missing {
        Some(e) => unit.inputs.iter().map(|_| Err(Error::FitFailed(e.clone()))).collect(),
        None => forecaster.forecast(&unit.config, &inputs, seed),
    };
    let elapsed = started.elapsed().as_secs_f64();
    let mut by_region: BTreeMap<Region, Result<Vec<f64>>> = unit.inputs.iter().copied().zip(outcomes).collect();
    unit.emit
        .iter()
        .map(|r| {
            let t = task(*r);
            let outcome = by_region
                .remove(r)
                .unwrap_or_else(|| Err(Error::FitFailed("forecaster returned too few results".into())));
            let test = data.0[&t].as_ref().ok().map(|d| d.test.values());
            let mut rec = record(t, &unit.config, seed, outcome, test);
            rec.wall_time = elapsed;
            rec
        })
        .collect()
}

fn run_units(
    units: &[Unit],
    data: &Datasets,
    forecaster: &dyn Forecaster,
    opts: &RunOptions,
    store: Option<&RunStore>,
) -> Result<Vec<RunRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::Invalid(format!("worker pool: {e}")))?;
    let results: Vec<Result<Vec<RunRecord>>> = pool.install(|| {
        units
            .par_iter()
            .map(|u| {
                if opts.cancelled() {
                    return Ok(Vec::new());
                }
                let recs = execute(u, data, forecaster, opts.seed);
                if let Some(s) = store {
                    for r in &recs {
                        s.append(r)?;
                    }
                }
                Ok(recs)
            })
            .collect()
    });
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

fn check_sweep(dimension: Dimension, baseline: &Settings, sweep: &[Settings]) -> Result<()> {
    if sweep.is_empty() {
        return Err(Error::Empty("dimension sweep".into()));
    }
    for s in sweep {
        let ok = match dimension {
            Dimension::TsLength => s.config == baseline.config,
            Dimension::HyperparameterTuning => {
                s.window == baseline.window && s.config.family() == baseline.config.family()
            }
            Dimension::ModelSelection => s.window == baseline.window,
        };
        if !ok {
            return Err(Error::Invalid(format!(
                "sweep point {} / {} varies more than {dimension}",
                s.config, s.window
            )));
        }
    }
    Ok(())
}

/// One record per sweep point for a single region, all other dimensions at `baseline`.
#[allow(clippy::too_many_arguments)]
pub fn run_dimension(
    snapshot: &Snapshot,
    kind: TaskKind,
    region: Region,
    dimension: Dimension,
    baseline: &Settings,
    sweep: &[Settings],
    forecaster: &dyn Forecaster,
    opts: &RunOptions,
) -> Result<Vec<RunRecord>> {
    check_sweep(dimension, baseline, sweep)?;
    let units: Vec<Unit> = sweep
        .iter()
        .map(|s| Unit {
            config: s.config.clone(),
            kind,
            window: s.window,
            inputs: if forecaster.joint(s.config.family()) {
                Region::ALL.to_vec()
            } else {
                vec![region]
            },
            emit: vec![region],
        })
        .collect();
    let tasks = units.iter().flat_map(|u| {
        u.inputs
            .iter()
            .map(move |r| ForecastTask::new(*r, kind.target, kind.horizon, u.window))
    });
    let data = Datasets::build(snapshot, tasks.collect::<Vec<_>>());
    let mut recs = run_units(&units, &data, forecaster, opts, None)?;
    recs.sort_by_key(|r| r.key());
    Ok(recs)
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    /// Records sorted by key.
    pub records: Vec<RunRecord>,
    pub cancelled: bool,
}

/// Record count of a complete experiment: every family sweep at the baseline window, plus
/// the two extra windows of the length sweep.
pub fn expected_records(grid: &ExperimentGrid, kinds: &[TaskKind], regions: &[Region]) -> usize {
    kinds.len() * regions.len() * (grid.size() + 2)
}

/// Full attribution protocol: each family's sweep at the 200-day window, then the
/// baseline SEIR-HCD configuration at the other two windows.
pub fn run_experiment(
    snapshot: &Snapshot,
    grid: &ExperimentGrid,
    kinds: &[TaskKind],
    regions: &[Region],
    forecaster: &dyn Forecaster,
    opts: &RunOptions,
    store: Option<&RunStore>,
) -> Result<ExperimentOutcome> {
    if kinds.is_empty() || regions.is_empty() {
        return Err(Error::Empty("no tasks or regions selected".into()));
    }
    let mut units = Vec::new();
    for &kind in kinds {
        for family in Family::ALL {
            for config in grid.configs(family) {
                if forecaster.joint(family) {
                    units.push(Unit {
                        config: config.clone(),
                        kind,
                        window: WindowPolicy::Fixed200,
                        inputs: Region::ALL.to_vec(),
                        emit: regions.to_vec(),
                    });
                } else {
                    for &r in regions {
                        units.push(Unit {
                            config: config.clone(),
                            kind,
                            window: WindowPolicy::Fixed200,
                            inputs: vec![r],
                            emit: vec![r],
                        });
                    }
                }
            }
        }
    }
    let mut tasks = Vec::new();
    for &kind in kinds {
        for r in Region::ALL {
            for w in WindowPolicy::ALL {
                tasks.push(ForecastTask::new(r, kind.target, kind.horizon, w));
            }
        }
    }
    let data = Datasets::build(snapshot, tasks);
    let mut records = run_units(&units, &data, forecaster, opts, store)?;

    let mut length_units = Vec::new();
    for &kind in kinds {
        for &r in regions {
            let family: Vec<&RunRecord> = records
                .iter()
                .filter(|x| x.task.kind() == kind && x.task.region == r && x.config.family() == Family::SeirHcd)
                .collect();
            if let Some(base) = hyper_baseline(&family) {
                for w in [WindowPolicy::SinceVaccine, WindowPolicy::FullHistory] {
                    length_units.push(Unit {
                        config: base.clone(),
                        kind,
                        window: w,
                        inputs: vec![r],
                        emit: vec![r],
                    });
                }
            }
        }
    }
    records.extend(run_units(&length_units, &data, forecaster, opts, store)?);
    records.sort_by_key(|r| r.key());
    Ok(ExperimentOutcome {
        records,
        cancelled: opts.cancelled(),
    })
}
