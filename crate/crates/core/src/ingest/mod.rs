//! Reading JHU CSSE US time-series snapshots into state-level series and task splits.

mod cache;
mod snapshot;

pub use cache::{fetch, Manifest, ManifestEntry};
pub use snapshot::{parse_snapshot, CountyRow, RawSnapshot};

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::series::DatedSeries;
use crate::task::{ForecastTask, Region, Target};

pub const CONFIRMED_FILE: &str = "time_series_covid19_confirmed_US.csv";
pub const DEATHS_FILE: &str = "time_series_covid19_deaths_US.csv";

/// Cumulative series for `state` (a `Province_State` name or a two-letter region code),
/// summed over counties.
pub fn state_series(snapshot: &RawSnapshot, state: &str) -> Result<DatedSeries> {
    let (name, code) = match state.parse::<Region>() {
        Ok(r) => (r.state_name().to_string(), r.code().to_string()),
        Err(_) => (state.to_string(), state.to_string()),
    };
    let mut sums = vec![0.0; snapshot.dates.len()];
    let mut found = false;
    for row in snapshot.rows.iter().filter(|r| r.state == name) {
        found = true;
        for (acc, v) in sums.iter_mut().zip(&row.counts) {
            *acc += v;
        }
    }
    if !found {
        return Err(Error::UnknownState(state.to_string()));
    }
    let start = snapshot.dates[0];
    for (i, d) in snapshot.dates.iter().enumerate() {
        if *d != start + chrono::Duration::days(i as i64) {
            return Err(Error::Invalid(format!("date columns have a gap before {d}")));
        }
    }
    DatedSeries::new(start, sums, format!("{}-{}", snapshot.target.short(), code))
}

/// Population of a state from the `Population` column of a death snapshot.
pub fn state_population(snapshot: &RawSnapshot, state: &str) -> Result<u64> {
    let name = state
        .parse::<Region>()
        .map(|r| r.state_name().to_string())
        .unwrap_or_else(|_| state.to_string());
    let mut total = 0u64;
    let mut found = false;
    for row in snapshot.rows.iter().filter(|r| r.state == name) {
        found = true;
        total += row
            .population
            .ok_or_else(|| Error::MissingColumn("Population (populations come from the death file)".into()))?;
    }
    if !found {
        return Err(Error::UnknownState(state.to_string()));
    }
    if total == 0 {
        return Err(Error::Invalid(format!("state `{state}` has zero population")));
    }
    Ok(total)
}

/// A pair of confirmed and death snapshots plus the hash of their bytes.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub confirmed: RawSnapshot,
    pub death: RawSnapshot,
    /// Hex SHA-256 over the confirmed bytes followed by the death bytes.
    pub content_hash: String,
}

impl Snapshot {
    pub fn from_texts(confirmed_csv: &str, death_csv: &str) -> Result<Self> {
        let mut hasher = Sha256::new();
        hasher.update(confirmed_csv.as_bytes());
        hasher.update(death_csv.as_bytes());
        Ok(Self {
            confirmed: parse_snapshot(confirmed_csv, Target::Confirmed)?,
            death: parse_snapshot(death_csv, Target::Death)?,
            content_hash: hex::encode(hasher.finalize()),
        })
    }

    /// Loads the two standard JHU file names from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let confirmed = std::fs::read_to_string(dir.join(CONFIRMED_FILE))?;
        let death = std::fs::read_to_string(dir.join(DEATHS_FILE))?;
        Self::from_texts(&confirmed, &death)
    }

    pub fn raw(&self, target: Target) -> &RawSnapshot {
        match target {
            Target::Confirmed => &self.confirmed,
            Target::Death => &self.death,
        }
    }

    /// Daily (non-cumulative) series for a region and target.
    pub fn daily(&self, region: Region, target: Target) -> Result<DatedSeries> {
        state_series(self.raw(target), region.code())?.cumulative_to_daily()
    }

    pub fn population(&self, region: Region) -> Result<u64> {
        state_population(&self.death, region.code())
    }
}

/// Training and test split for one task.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskDataset {
    pub task: ForecastTask,
    /// Daily values of the task target over the training range.
    pub train: DatedSeries,
    /// Daily values of the task target over the horizon after training.
    pub test: DatedSeries,
    /// Daily values of the other target over the same training range.
    pub companion: DatedSeries,
    pub population: u64,
}

impl TaskDataset {
    /// Training series of a given target (the task target or its companion).
    pub fn train_of(&self, target: Target) -> &DatedSeries {
        if target == self.task.target {
            &self.train
        } else {
            &self.companion
        }
    }
}

fn window(series: &DatedSeries, start: chrono::NaiveDate, end: chrono::NaiveDate) -> Result<DatedSeries> {
    if end > series.end() {
        return Err(Error::Coverage {
            needed: end,
            have: series.end(),
        });
    }
    series.slice_window(start, end)
}

pub fn build_task_dataset(snapshot: &Snapshot, task: ForecastTask) -> Result<TaskDataset> {
    let (train_start, train_end) = task.train_range();
    let (test_start, test_end) = task.test_range();
    let target = snapshot.daily(task.region, task.target)?;
    let other = match task.target {
        Target::Confirmed => Target::Death,
        Target::Death => Target::Confirmed,
    };
    let companion = snapshot.daily(task.region, other)?;
    Ok(TaskDataset {
        task,
        train: window(&target, train_start, train_end)?,
        test: window(&target, test_start, test_end)?,
        companion: window(&companion, train_start, train_end)?,
        population: snapshot.population(task.region)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY_CONF: &str = "\
UID,iso2,iso3,code3,FIPS,Admin2,Province_State,Country_Region,Lat,Long_,Combined_Key,1/22/20,1/23/20,1/24/20,1/25/20
1,US,USA,840,6001,Alameda,California,US,37.6,-121.8,\"Alameda, California, US\",1,2,3,5
2,US,USA,840,6003,Alpine,California,US,38.5,-119.8,\"Alpine, California, US\",0,1,1,1
3,US,USA,840,15001,Hawaii,Hawaii,US,19.6,-155.5,\"Hawaii, Hawaii, US\",0,0,2,2
";

    #[test]
    fn columnwise_sum_per_state() {
        let snap = parse_snapshot(TOY_CONF, Target::Confirmed).unwrap();
        let ca = state_series(&snap, "CA").unwrap();
        assert_eq!(ca.values(), &[1.0, 3.0, 4.0, 6.0]);
        assert_eq!(ca.label(), "Conf-CA");
        let hi = state_series(&snap, "Hawaii").unwrap();
        assert_eq!(hi.values(), snap.rows[2].counts.as_slice());
        assert!(matches!(state_series(&snap, "TX"), Err(Error::UnknownState(_))));
    }

    #[test]
    fn additive_over_county_partitions() {
        let snap = parse_snapshot(TOY_CONF, Target::Confirmed).unwrap();
        let mut a = snap.clone();
        a.rows.retain(|r| r.admin2 == "Alameda");
        let mut b = snap.clone();
        b.rows.retain(|r| r.admin2 == "Alpine");
        let whole = state_series(&snap, "CA").unwrap();
        let sa = state_series(&a, "CA").unwrap();
        let sb = state_series(&b, "CA").unwrap();
        let summed: Vec<f64> = sa.values().iter().zip(sb.values()).map(|(x, y)| x + y).collect();
        assert_eq!(summed, whole.values());
    }

    #[test]
    fn population_requires_death_layout() {
        let snap = parse_snapshot(TOY_CONF, Target::Confirmed).unwrap();
        assert!(matches!(state_population(&snap, "CA"), Err(Error::MissingColumn(_))));
    }
}
