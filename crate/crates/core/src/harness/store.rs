use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::error::Result;
use crate::metrics::MetricReport;
use crate::task::{ForecastTask, WindowPolicy};

pub const STORE_SCHEMA: u32 = 1;
pub const RUNS_FILE: &str = "runs.ndjson";
pub const TIMINGS_FILE: &str = "timings.ndjson";
const PARTIAL_FILE: &str = "runs.partial.ndjson";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    FitFailed,
    InvalidMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: u32,
    pub task: ForecastTask,
    pub config: ModelConfig,
    pub window_policy: WindowPolicy,
    pub seed: u64,
    pub status: RunStatus,
    pub report: Option<MetricReport>,
    pub forecast: Vec<f64>,
    pub error: Option<String>,
    /// Kept out of the main store so that it stays byte-identical across runs.
    #[serde(skip)]
    pub wall_time: f64,
}

impl RunRecord {
    pub fn key(&self) -> String {
        format!(
            "{}|{}|{}|{}",
            self.task.kind(),
            self.task.region,
            self.window_policy,
            self.config.key()
        )
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }
}

#[derive(Serialize, Deserialize)]
struct Timing {
    key: String,
    wall_time: f64,
}

/// Newline-delimited JSON record log in a directory. Records are appended as they finish
/// and rewritten in key order by [`RunStore::finalize`].
#[derive(Debug)]
pub struct RunStore {
    dir: PathBuf,
    partial: Mutex<Option<BufWriter<File>>>,
}

impl RunStore {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(dir.join(PARTIAL_FILE))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            partial: Mutex::new(Some(BufWriter::new(file))),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Appends one finished record; safe to call from worker threads.
    pub fn append(&self, record: &RunRecord) -> Result<()> {
        let mut guard = self.partial.lock().expect("store lock");
        if let Some(w) = guard.as_mut() {
            serde_json::to_writer(&mut *w, record)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        Ok(())
    }

    /// Writes `records` sorted by key, plus the timing sidecar, and drops the append log.
    pub fn finalize(&self, records: &[RunRecord]) -> Result<PathBuf> {
        self.partial.lock().expect("store lock").take();
        let path = write_records(&self.dir, records)?;
        let _ = fs::remove_file(self.dir.join(PARTIAL_FILE));
        Ok(path)
    }
}

pub fn write_records(dir: &Path, records: &[RunRecord]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.key());
    let path = dir.join(RUNS_FILE);
    let mut w = BufWriter::new(File::create(&path)?);
    let mut t = BufWriter::new(File::create(dir.join(TIMINGS_FILE))?);
    for r in sorted {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
        serde_json::to_writer(
            &mut t,
            &Timing {
                key: r.key(),
                wall_time: r.wall_time,
            },
        )?;
        t.write_all(b"\n")?;
    }
    w.flush()?;
    t.flush()?;
    Ok(path)
}

/// Reads a store directory, joining wall times from the sidecar when present.
pub fn read_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let reader = BufReader::new(File::open(dir.join(RUNS_FILE))?);
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str::<RunRecord>(&line)?);
    }
    if let Ok(f) = File::open(dir.join(TIMINGS_FILE)) {
        let times: std::collections::HashMap<String, f64> = BufReader::new(f)
            .lines()
            .map_while(|l| l.ok())
            .filter_map(|l| serde_json::from_str::<Timing>(&l).ok())
            .map(|t| (t.key, t.wall_time))
            .collect();
        for r in records.iter_mut() {
            if let Some(t) = times.get(&r.key()) {
                r.wall_time = *t;
            }
        }
    }
    Ok(records)
}
