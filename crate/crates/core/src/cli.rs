//! Batch command-line surface. [`run`] parses arguments, executes one subcommand and
//! returns the process exit code: 0 success, 1 usage or data error, 2 model failure,
//! 3 empty attribution.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::acts::{self, ActsData, ActsHyper};
use crate::error::{Error, Result};
use crate::harness::{
    attribution_report, read_records, run_dimension, run_experiment, AttributionReport, Dimension, ExperimentGrid,
    Family, Forecaster, ModelConfig, ModelForecaster, Quantity, RunOptions, RunRecord, RunStore, Settings,
    StubForecaster,
};
use crate::ingest::{self, build_task_dataset, Snapshot, TaskDataset};
use crate::metrics::{evaluate, Metric, MetricReport};
use crate::preprocess::{adf_test, stationarize, SignificanceLevel};
use crate::sarima::SarimaOrder;
use crate::seir::SeirHcdParams;
use crate::series::summary_stats;
use crate::task::{first_case_date, snapshot_end, ForecastTask, Horizon, Region, Target, TaskKind, WindowPolicy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_MODEL: i32 = 2;
pub const EXIT_EMPTY: i32 = 3;
pub const EXIT_INTERRUPTED: i32 = 130;

pub const CONFIRMED_URL: &str = "https://raw.githubusercontent.com/CSSEGISandData/COVID-19/master/csse_covid_19_data/csse_covid_19_time_series/time_series_covid19_confirmed_US.csv";
pub const DEATHS_URL: &str = "https://raw.githubusercontent.com/CSSEGISandData/COVID-19/master/csse_covid_19_data/csse_covid_19_time_series/time_series_covid19_deaths_US.csv";

/// Environment variable naming the default snapshot directory.
pub const SNAPSHOT_ENV: &str = "EPICAST_SNAPSHOT_DIR";

/// Settings that can come from a JSON file; command-line flags take precedence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CliConfig {
    pub data_path: PathBuf,
    pub fetch_url: Option<String>,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub jobs: usize,
    pub reduced_grid: bool,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            data_path: std::env::var_os(SNAPSHOT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("data/jhu")),
            fetch_url: None,
            cache_dir: PathBuf::from(".epicast-cache"),
            output_dir: PathBuf::from("out"),
            seed: 0,
            jobs: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            reduced_grid: true,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "epicast",
    version,
    about = "COVID-19 case forecasting and dimension attribution"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON file with CliConfig fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Snapshot directory holding the two JHU time-series files.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Use the seeded synthetic snapshot instead of files on disk.
    #[arg(long, global = true, value_name = "SEED")]
    synthetic: Option<u64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Sarima,
    Seirhcd,
    Acts,
    Stub,
}

impl FamilyArg {
    fn family(self) -> Option<Family> {
        match self {
            FamilyArg::Sarima => Some(Family::Sarima),
            FamilyArg::Seirhcd => Some(Family::SeirHcd),
            FamilyArg::Acts => Some(Family::Acts),
            FamilyArg::Stub => None,
        }
    }
}

#[derive(Debug, Args)]
struct TaskArgs {
    #[arg(long)]
    state: Region,
    #[arg(long)]
    target: Target,
    #[arg(long, default_value_t = 7)]
    horizon: usize,
    /// vaccine, 200 or full.
    #[arg(long, default_value = "200")]
    window: WindowPolicy,
}

impl TaskArgs {
    fn task(&self) -> Result<ForecastTask> {
        Ok(ForecastTask::new(
            self.state,
            self.target,
            Horizon::from_days(self.horizon)?,
            self.window,
        ))
    }
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Desk-scale grids (default).
    #[arg(long, conflicts_with = "full_grid")]
    reduced_grid: bool,
    /// The complete search spaces.
    #[arg(long)]
    full_grid: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Download the confirmed and death files into the snapshot directory.
    Fetch {
        #[arg(long)]
        confirmed_url: Option<String>,
        #[arg(long)]
        deaths_url: Option<String>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Summary statistics of a state's daily series.
    Stats {
        #[arg(long)]
        state: Region,
        #[arg(long)]
        target: Target,
    },
    /// Augmented Dickey-Fuller test on a task's processed training series.
    Adf {
        #[command(flatten)]
        task: TaskArgs,
    },
    /// Fit one configuration and forecast the task horizon.
    Forecast {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// SARIMA order `p,d,q,P,D,Q[,s]`.
        #[arg(long)]
        order: Option<SarimaOrder>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        rate: Option<f64>,
    },
    /// Sweep one family's hyperparameter grid on a task.
    Grid {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[command(flatten)]
        grid: GridArgs,
        /// Ranking metric.
        #[arg(long, default_value = "accuracy")]
        metric: Metric,
    },
    /// Run the three dimension sweeps and report improvement and variation.
    Attribute {
        /// Task code such as 7-C; all four when omitted.
        #[arg(long)]
        task: Option<TaskKind>,
        #[arg(long, conflicts_with = "all_regions")]
        region: Option<Region>,
        #[arg(long)]
        all_regions: bool,
        #[command(flatten)]
        grid: GridArgs,
        /// Replace the models with the deterministic stub forecaster.
        #[arg(long)]
        stub: bool,
        /// Metric for the plot data and printed tables.
        #[arg(long, default_value = "accuracy")]
        metric: Metric,
        /// Also write bar-chart data for the chosen metric.
        #[arg(long)]
        plot_data: bool,
    },
    /// Attribution report from an existing run store.
    Report {
        /// Directory containing runs.ndjson.
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        task: Option<TaskKind>,
        #[arg(long, default_value = "accuracy")]
        metric: Metric,
    },
}

struct Ctx {
    config: CliConfig,
    synthetic: Option<u64>,
    format: Format,
}

impl Ctx {
    fn snapshot(&self) -> Result<Snapshot> {
        match self.synthetic {
            Some(seed) => Ok(crate::synth::synthetic_snapshot(seed)),
            None => Snapshot::load_dir(&self.config.data_path).map_err(|e| match e {
                Error::Io(io) => Error::Io(std::io::Error::new(
                    io.kind(),
                    format!("snapshot at {}: {io}", self.config.data_path.display()),
                )),
                other => other,
            }),
        }
    }

    fn output_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.config.output_dir)?;
        Ok(&self.config.output_dir)
    }
}

fn resolve(common: &Common) -> Result<CliConfig> {
    let mut config = match &common.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => CliConfig::default(),
    };
    if let Some(d) = &common.data {
        config.data_path = d.clone();
    }
    if let Some(o) = &common.output_dir {
        config.output_dir = o.clone();
    }
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if let Some(j) = common.jobs {
        config.jobs = j;
    }
    if config.jobs == 0 {
        return Err(Error::Invalid("--jobs must be at least 1".into()));
    }
    Ok(config)
}

enum Failure {
    Usage(String),
    Model(String),
    Empty(String),
    Interrupted(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::FitFailed(_)
            | Error::NotConverged
            | Error::Untrained
            | Error::Degenerate(_)
            | Error::NoValidResults(_)
            | Error::Singular(_)
            | Error::Length { .. } => Failure::Model(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` (including the program name), runs the command writing to `out`, and
/// returns the exit code. Errors go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_USAGE;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    let result = resolve(&cli.common).map_err(Failure::from).and_then(|config| {
        let ctx = Ctx {
            config,
            synthetic: cli.common.synthetic,
            format: cli.common.format,
        };
        dispatch(&ctx, cli.command, out)
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Model(m)) => {
            let _ = writeln!(out, "{}", json!({ "status": "fit_failed", "error": m }));
            let _ = writeln!(err, "error: model failure: {m}");
            EXIT_MODEL
        }
        Err(Failure::Empty(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_EMPTY
        }
        Err(Failure::Interrupted(m)) => {
            let _ = writeln!(err, "interrupted: {m}");
            EXIT_INTERRUPTED
        }
    }
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn dispatch(ctx: &Ctx, command: Command, out: &mut dyn Write) -> CmdResult {
    match command {
        Command::Fetch {
            confirmed_url,
            deaths_url,
            cache_dir,
        } => cmd_fetch(ctx, confirmed_url, deaths_url, cache_dir, out),
        Command::Stats { state, target } => cmd_stats(ctx, state, target, out),
        Command::Adf { task } => cmd_adf(ctx, task.task()?, out),
        Command::Forecast {
            task,
            family,
            order,
            epochs,
            hidden,
            rate,
        } => {
            let task = task.task()?;
            let config = match family {
                FamilyArg::Stub => {
                    return Err(Failure::Usage(
                        "the stub family is only available to `attribute --stub`".into(),
                    ))
                }
                FamilyArg::Sarima => ModelConfig::Sarima {
                    order: order.unwrap_or_else(|| default_order(task.target)),
                },
                FamilyArg::Seirhcd => ModelConfig::SeirHcd {
                    start: SeirHcdParams::default_point(),
                },
                FamilyArg::Acts => ModelConfig::Acts {
                    epochs: epochs.unwrap_or(acts::EPOCHS[0]),
                    hidden: hidden.unwrap_or(acts::HIDDEN[0]),
                    rate: rate.unwrap_or(acts::RATES[1]),
                },
            };
            cmd_forecast(ctx, task, config, out)
        }
        Command::Grid {
            task,
            family,
            grid,
            metric,
        } => cmd_grid(ctx, task.task()?, family, &grid, metric, out),
        Command::Attribute {
            task,
            region,
            all_regions,
            grid,
            stub,
            metric,
            plot_data,
        } => {
            let kinds: Vec<TaskKind> = task.map(|t| vec![t]).unwrap_or_else(|| TaskKind::ALL.to_vec());
            let regions: Vec<Region> = match (region, all_regions) {
                (Some(r), _) => vec![r],
                _ => Region::ALL.to_vec(),
            };
            cmd_attribute(ctx, &kinds, &regions, &grid, stub, metric, plot_data, out)
        }
        Command::Report { runs, task, metric } => {
            let records = read_records(&runs)?;
            let report = attribution_report(&records).map_err(|e| Failure::Empty(e.to_string()))?;
            emit_report(ctx, &report, task, metric, out)
        }
    }
}

fn io<T>(r: std::io::Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| Failure::Usage(e.to_string()))
}

/// Default SARIMA order: the stationarizing differencing of each target with one AR,
/// one MA and one seasonal AR term.
pub fn default_order(target: Target) -> SarimaOrder {
    let d = match target {
        Target::Confirmed => 2,
        Target::Death => 1,
    };
    SarimaOrder::weekly(1, d, 1, 1, 0, 0).expect("valid order")
}

fn cmd_fetch(
    ctx: &Ctx,
    confirmed_url: Option<String>,
    deaths_url: Option<String>,
    cache_dir: Option<PathBuf>,
    out: &mut dyn Write,
) -> CmdResult {
    let dir = &ctx.config.data_path;
    if let Some(seed) = ctx.synthetic {
        crate::synth::write_jhu_snapshot(dir, seed)?;
    } else {
        let cache = cache_dir.unwrap_or_else(|| ctx.config.cache_dir.clone());
        let base = ctx.config.fetch_url.clone();
        let url = |explicit: Option<String>, file: &str, default: &str| {
            explicit.unwrap_or_else(|| match &base {
                Some(b) => format!("{}/{file}", b.trim_end_matches('/')),
                None => default.to_string(),
            })
        };
        std::fs::create_dir_all(dir).map_err(Error::from)?;
        for (u, file) in [
            (
                url(confirmed_url, ingest::CONFIRMED_FILE, CONFIRMED_URL),
                ingest::CONFIRMED_FILE,
            ),
            (url(deaths_url, ingest::DEATHS_FILE, DEATHS_URL), ingest::DEATHS_FILE),
        ] {
            let cached = ingest::fetch(&u, &cache)?;
            std::fs::copy(&cached, dir.join(file)).map_err(Error::from)?;
        }
    }
    let snap = Snapshot::load_dir(dir)?;
    let body = json!({ "data_path": dir, "content_hash": snap.content_hash });
    io(writeln!(
        out,
        "{}",
        if ctx.format == Format::Json {
            body.to_string()
        } else {
            format!("snapshot {} at {}", snap.content_hash, dir.display())
        }
    ))
}

fn cmd_stats(ctx: &Ctx, region: Region, target: Target, out: &mut dyn Write) -> CmdResult {
    let snap = ctx.snapshot()?;
    let daily = snap.daily(region, target)?;
    let series = daily.slice_window(first_case_date(region, target), snapshot_end())?;
    let s = summary_stats(&series)?;
    let rows = [
        ("min", s.min),
        ("max", s.max),
        ("mean", s.mean),
        ("variance", s.variance),
        ("25%", s.p25),
        ("50%", s.median),
        ("75%", s.p75),
        ("skewness", s.skewness),
        ("kurtosis", s.kurtosis),
    ];
    let label = format!("{}-{}", target.short(), region.code());
    match ctx.format {
        Format::Json => io(writeln!(
            out,
            "{}",
            json!({ "series": label, "stats": s, "snapshot": snap.content_hash })
        )),
        Format::Csv => {
            io(writeln!(out, "series,{}", rows.map(|r| r.0).join(",")))?;
            io(writeln!(out, "{label},{}", rows.map(|r| format!("{}", r.1)).join(",")))
        }
        Format::Table => {
            io(writeln!(out, "{label}"))?;
            for (k, v) in rows {
                io(writeln!(out, "  {k:<9} {v:>16.3}"))?;
            }
            Ok(())
        }
    }
}

fn cmd_adf(ctx: &Ctx, task: ForecastTask, out: &mut dyn Write) -> CmdResult {
    let snap = ctx.snapshot()?;
    let ds = build_task_dataset(&snap, task)?;
    let (transform, processed) = stationarize(ds.train.values(), task.target)?;
    let r = adf_test(&processed)?;
    let verdict = if r.rejects(SignificanceLevel::FivePercent) {
        "stationary"
    } else {
        "unit root not rejected"
    };
    match ctx.format {
        Format::Json => io(writeln!(
            out,
            "{}",
            json!({ "task": task.to_string(), "adf": r, "lambda": transform.lambda, "verdict": verdict })
        )),
        Format::Csv => {
            io(writeln!(out, "task,statistic,lags,nobs,reject_5pct"))?;
            io(writeln!(
                out,
                "{task},{},{},{},{}",
                r.statistic,
                r.lags_used,
                r.nobs,
                r.rejects(SignificanceLevel::FivePercent)
            ))
        }
        Format::Table => io(writeln!(
            out,
            "{task}: ADF {:.4} (lags {}, n {}), 5% critical -2.869: {verdict}",
            r.statistic, r.lags_used, r.nobs
        )),
    }
}

#[derive(Debug, Serialize)]
struct ForecastDoc<'a> {
    task: String,
    config: &'a ModelConfig,
    seed: u64,
    snapshot: &'a str,
    dates: Vec<String>,
    forecast: &'a [f64],
    truth: &'a [f64],
    metrics: &'a MetricReport,
}

fn fit_one(config: &ModelConfig, ds: &TaskDataset, snap: &Snapshot, seed: u64) -> Result<Vec<f64>> {
    match config {
        ModelConfig::Acts { epochs, hidden, rate } => {
            let mut series = Vec::new();
            let mut index = 0;
            for (i, r) in Region::ALL.iter().enumerate() {
                if *r == ds.task.region {
                    index = i;
                }
                series.push(build_task_dataset(snap, ForecastTask { region: *r, ..ds.task })?.train);
            }
            let data = ActsData::from_series(&series)?;
            let model = acts::train(
                &data,
                &ActsHyper::new(*epochs, *hidden, *rate, ds.task.horizon.days()).with_seed(seed),
            )?;
            acts::forecast(&model, &data, index)
        }
        _ => ModelForecaster::default()
            .forecast(config, &[ds], seed)
            .pop()
            .unwrap_or_else(|| Err(Error::FitFailed("no forecast produced".into()))),
    }
}

fn cmd_forecast(ctx: &Ctx, task: ForecastTask, config: ModelConfig, out: &mut dyn Write) -> CmdResult {
    let snap = ctx.snapshot()?;
    let ds = build_task_dataset(&snap, task)?;
    let seed = ctx.config.seed;
    let forecast = fit_one(&config, &ds, &snap, seed)?;
    let metrics = evaluate(ds.test.values(), &forecast)?;
    let doc = ForecastDoc {
        task: task.to_string(),
        config: &config,
        seed,
        snapshot: &snap.content_hash,
        dates: (0..ds.test.len()).map(|i| ds.test.date_at(i).to_string()).collect(),
        forecast: &forecast,
        truth: ds.test.values(),
        metrics: &metrics,
    };
    let text = serde_json::to_string_pretty(&doc).map_err(Error::from)?;
    let name = format!(
        "forecast_{}_{}_{}_{}.json",
        task.kind(),
        task.region,
        task.window,
        config.family().as_str().to_ascii_lowercase()
    );
    let path = ctx.output_dir()?.join(name);
    io(std::fs::write(&path, format!("{text}\n")))?;
    match ctx.format {
        Format::Json => io(writeln!(out, "{text}")),
        Format::Csv => {
            io(writeln!(out, "date,forecast,truth"))?;
            for (i, d) in doc.dates.iter().enumerate() {
                io(writeln!(out, "{d},{},{}", forecast[i], doc.truth[i]))?;
            }
            Ok(())
        }
        Format::Table => {
            io(writeln!(out, "{task} {config}"))?;
            for (i, d) in doc.dates.iter().enumerate() {
                io(writeln!(out, "  {d} {:>12.1} {:>12.1}", forecast[i], doc.truth[i]))?;
            }
            for m in Metric::ALL {
                io(writeln!(out, "  {:<9} {:.4}", m.name(), metrics.get(m)))?;
            }
            io(writeln!(out, "written to {}", path.display()))
        }
    }
}

fn grid_for(args: &GridArgs, config: &CliConfig) -> ExperimentGrid {
    if args.full_grid || (!args.reduced_grid && !config.reduced_grid) {
        ExperimentGrid::full()
    } else {
        ExperimentGrid::reduced()
    }
}

fn forecaster(stub: bool) -> Box<dyn Forecaster> {
    if stub {
        Box::new(StubForecaster::hashed())
    } else {
        Box::new(ModelForecaster::default())
    }
}

fn cmd_grid(
    ctx: &Ctx,
    task: ForecastTask,
    family: FamilyArg,
    grid: &GridArgs,
    metric: Metric,
    out: &mut dyn Write,
) -> CmdResult {
    let snap = ctx.snapshot()?;
    let stub = family == FamilyArg::Stub;
    let family = family.family().unwrap_or(Family::SeirHcd);
    let configs = grid_for(grid, &ctx.config).configs(family);
    let sweep: Vec<Settings> = configs
        .iter()
        .map(|c| Settings {
            config: c.clone(),
            window: task.window,
        })
        .collect();
    let opts = RunOptions::new(ctx.config.jobs, ctx.config.seed);
    let mut records = run_dimension(
        &snap,
        task.kind(),
        task.region,
        Dimension::HyperparameterTuning,
        &sweep[0],
        &sweep,
        forecaster(stub).as_ref(),
        &opts,
    )?;
    let score = |r: &RunRecord| r.report.as_ref().and_then(|m| m.usable(metric));
    records.sort_by(|a, b| {
        let (sa, sb) = (score(a), score(b));
        let key = |s: Option<f64>| {
            s.map(|v| if metric.higher_is_better() { -v } else { v })
                .unwrap_or(f64::INFINITY)
        };
        key(sa)
            .total_cmp(&key(sb))
            .then_with(|| a.config.key().cmp(&b.config.key()))
    });
    let dir = ctx.output_dir()?.join(format!(
        "grid_{}_{}_{}_{}",
        task.kind(),
        task.region,
        task.window,
        family.as_str().to_ascii_lowercase()
    ));
    crate::harness::write_records(&dir, &records)?;
    if records.iter().all(|r| !r.is_ok()) {
        return Err(Failure::Model(format!(
            "every configuration failed; see {}",
            dir.display()
        )));
    }
    match ctx.format {
        Format::Json => {
            let rows: Vec<_> = records
                .iter()
                .map(|r| json!({ "config": r.config.key(), "status": r.status, metric.name(): score(r) }))
                .collect();
            io(writeln!(
                out,
                "{}",
                json!({ "task": task.to_string(), "metric": metric.name(), "ranked": rows })
            ))
        }
        Format::Csv => {
            io(writeln!(out, "rank,config,status,{}", metric.name()))?;
            for (i, r) in records.iter().enumerate() {
                let s = score(r).map(|v| v.to_string()).unwrap_or_default();
                io(writeln!(out, "{},\"{}\",{:?},{s}", i + 1, r.config.key(), r.status))?;
            }
            Ok(())
        }
        Format::Table => {
            io(writeln!(
                out,
                "{task} {family} ranked by {metric} ({} configs)",
                records.len()
            ))?;
            for (i, r) in records.iter().take(20).enumerate() {
                let s = score(r).map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
                io(writeln!(out, "{:>4}  {:>12}  {}", i + 1, s, r.config.key()))?;
            }
            io(writeln!(out, "records in {}", dir.display()))
        }
    }
}

fn plot_csv(report: &AttributionReport, metric: Metric) -> String {
    let mut s = String::from("task,region,dimension,improvement_pct,variation_pct\n");
    for r in report.rows.iter().filter(|r| r.metric == metric) {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.task,
            r.region,
            r.dimension.short(),
            r.improvement_pct,
            r.variation_pct
        ));
    }
    s
}

fn emit_report(
    ctx: &Ctx,
    report: &AttributionReport,
    task: Option<TaskKind>,
    metric: Metric,
    out: &mut dyn Write,
) -> CmdResult {
    match ctx.format {
        Format::Json => io(writeln!(out, "{}", report.to_json()?)),
        Format::Csv => io(write!(out, "{}", report.to_csv()?)),
        Format::Table => {
            let kinds: Vec<TaskKind> = task.map(|t| vec![t]).unwrap_or_else(|| TaskKind::ALL.to_vec());
            let mut regions: Vec<String> = report.rows.iter().map(|r| r.region.clone()).collect();
            regions.sort();
            regions.dedup();
            let region = if regions.iter().any(|r| r == "ALL") && regions.len() > 2 {
                "ALL".to_string()
            } else {
                regions.into_iter().find(|r| r != "ALL").unwrap_or_else(|| "ALL".into())
            };
            for kind in kinds {
                let code = kind.code();
                if !report.rows.iter().any(|r| r.task == code) {
                    continue;
                }
                io(writeln!(out, "{}", report.table(&code, &region, Quantity::Improvement)))?;
                io(writeln!(out, "{}", report.table(&code, &region, Quantity::Variation)))?;
            }
            for line in &report.incomplete {
                io(writeln!(out, "incomplete: {line}"))?;
            }
            io(writeln!(
                out,
                "{} bars: {}",
                metric.name(),
                report.rows.iter().filter(|r| r.metric == metric).count()
            ))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_attribute(
    ctx: &Ctx,
    kinds: &[TaskKind],
    regions: &[Region],
    grid: &GridArgs,
    stub: bool,
    metric: Metric,
    plot_data: bool,
    out: &mut dyn Write,
) -> CmdResult {
    let snap = ctx.snapshot()?;
    let grid = grid_for(grid, &ctx.config);
    let dir = ctx.output_dir()?.to_path_buf();
    let store = RunStore::create(&dir.join("runs"))?;
    let cancel = Arc::new(AtomicBool::new(false));
    {
        let c = cancel.clone();
        // a handler may already be installed when called repeatedly in one process
        let _ = ctrlc::set_handler(move || c.store(true, Ordering::SeqCst));
    }
    let opts = RunOptions {
        jobs: ctx.config.jobs,
        seed: ctx.config.seed,
        cancel: Some(cancel),
    };
    let f = forecaster(stub);
    let outcome = run_experiment(&snap, &grid, kinds, regions, f.as_ref(), &opts, Some(&store))?;
    if outcome.cancelled {
        return Err(Failure::Interrupted(format!(
            "{} finished records kept in {}",
            outcome.records.len(),
            store.dir().join("runs.partial.ndjson").display()
        )));
    }
    store.finalize(&outcome.records)?;
    let report = attribution_report(&outcome.records).map_err(|e| Failure::Empty(e.to_string()))?;
    let empty_dims: Vec<String> = kinds
        .iter()
        .flat_map(|k| Dimension::ALL.iter().map(move |d| (k.code(), *d)))
        .filter(|(k, d)| !report.rows.iter().any(|r| &r.task == k && r.dimension == *d))
        .map(|(k, d)| format!("{k} {d}"))
        .collect();
    let mut doc = serde_json::to_value(&report).map_err(Error::from)?;
    doc["snapshot"] = json!(snap.content_hash);
    doc["seed"] = json!(ctx.config.seed);
    doc["records"] = json!(outcome.records.len());
    io(std::fs::write(
        dir.join("attribution.json"),
        serde_json::to_string_pretty(&doc).map_err(Error::from)? + "\n",
    ))?;
    io(std::fs::write(dir.join("attribution.csv"), report.to_csv()?))?;
    if plot_data {
        io(std::fs::write(
            dir.join(format!("plot_{}.csv", metric.name().to_ascii_lowercase())),
            plot_csv(&report, metric),
        ))?;
    }
    emit_report(ctx, &report, None, metric, out)?;
    if !empty_dims.is_empty() {
        return Err(Failure::Empty(format!("no valid runs for {}", empty_dims.join(", "))));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["epicast"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_one() {
        let (code, _, err) = call(&["stats", "--state", "ZZ", "--target", "death", "--synthetic", "1"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("ZZ"));
        assert_eq!(call(&["nope"]).0, EXIT_USAGE);
        assert_eq!(call(&["--help"]).0, EXIT_OK);
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("none");
        let (code, _, err) = call(&[
            "stats",
            "--state",
            "HI",
            "--target",
            "death",
            "--data",
            missing.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("snapshot"));
    }

    #[test]
    fn stats_formats() {
        let (code, out, _) = call(&[
            "stats",
            "--state",
            "HI",
            "--target",
            "death",
            "--synthetic",
            "1",
            "--format",
            "json",
        ]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
        assert_eq!(v["stats"].as_object().unwrap().len(), 9);
        let (code, out, _) = call(&["stats", "--state", "CA", "--target", "confirmed", "--synthetic", "1"]);
        assert_eq!(code, 0);
        assert!(out.contains("kurtosis"));
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        std::fs::write(&cfg, r#"{"seed": 5, "jobs": 3, "output_dir": "/tmp/x"}"#).unwrap();
        let common = Common {
            config: Some(cfg),
            data: None,
            synthetic: None,
            output_dir: None,
            seed: Some(9),
            jobs: None,
            format: Format::Table,
        };
        let c = resolve(&common).unwrap();
        assert_eq!((c.seed, c.jobs), (9, 3));
        assert_eq!(c.output_dir, PathBuf::from("/tmp/x"));
        assert!(c.reduced_grid);
    }

    #[test]
    fn forecast_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let o = dir.path().to_str().unwrap();
        let args = [
            "forecast",
            "--state",
            "MN",
            "--target",
            "death",
            "--horizon",
            "7",
            "--family",
            "sarima",
            "--order",
            "0,1,0,0,0,0",
            "--synthetic",
            "2",
            "--output-dir",
            o,
            "--format",
            "json",
        ];
        let (c1, a, _) = call(&args);
        let (c2, b, _) = call(&args);
        assert_eq!((c1, c2), (0, 0));
        assert_eq!(a, b);
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        let f: Vec<f64> = serde_json::from_value(v["forecast"].clone()).unwrap();
        assert_eq!(f.len(), 7);
        assert!(f.windows(2).all(|w| w[0] == w[1]));
        assert!(v["snapshot"].as_str().unwrap().len() == 64);
    }

    #[test]
    fn stub_attribution_writes_reports() {
        let dir = tempfile::tempdir().unwrap();
        let o = dir.path().to_str().unwrap();
        let (code, out, err) = call(&[
            "attribute",
            "--task",
            "7-C",
            "--region",
            "HI",
            "--stub",
            "--synthetic",
            "4",
            "--output-dir",
            o,
            "--plot-data",
            "--jobs",
            "2",
        ]);
        assert_eq!(code, 0, "{err}");
        assert!(out.contains("MS") && out.contains("LEN"));
        for f in [
            "attribution.json",
            "attribution.csv",
            "plot_accuracy.csv",
            "runs/runs.ndjson",
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let (code, out, _) = call(&["report", "--runs", &format!("{o}/runs"), "--format", "csv"]);
        assert_eq!(code, 0);
        assert_eq!(
            out,
            std::fs::read_to_string(dir.path().join("attribution.csv")).unwrap()
        );
        let empty = tempfile::tempdir().unwrap();
        std::fs::write(empty.path().join("runs.ndjson"), "").unwrap();
        assert_eq!(
            call(&["report", "--runs", empty.path().to_str().unwrap()]).0,
            EXIT_EMPTY
        );
    }
}
