//! Forecasting tasks and their training date ranges.

use std::fmt;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    CA,
    NY,
    TX,
    MN,
    HI,
}

impl Region {
    pub const ALL: [Region; 5] = [Region::CA, Region::NY, Region::TX, Region::MN, Region::HI];

    pub fn code(self) -> &'static str {
        match self {
            Region::CA => "CA",
            Region::NY => "NY",
            Region::TX => "TX",
            Region::MN => "MN",
            Region::HI => "HI",
        }
    }

    /// `Province_State` value used in the source files.
    pub fn state_name(self) -> &'static str {
        match self {
            Region::CA => "California",
            Region::NY => "New York",
            Region::TX => "Texas",
            Region::MN => "Minnesota",
            Region::HI => "Hawaii",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Region::ALL
            .into_iter()
            .find(|r| r.code().eq_ignore_ascii_case(s) || r.state_name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownState(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Confirmed,
    Death,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::Confirmed, Target::Death];

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Confirmed => "confirmed",
            Target::Death => "death",
        }
    }

    /// Label prefix used for derived series, e.g. `Conf-CA`.
    pub fn short(self) -> &'static str {
        match self {
            Target::Confirmed => "Conf",
            Target::Death => "Death",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "confirmed" | "conf" | "c" => Ok(Target::Confirmed),
            "death" | "deaths" | "d" => Ok(Target::Death),
            _ => Err(Error::Invalid(format!("unknown target `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Horizon {
    #[serde(rename = "7")]
    Week,
    #[serde(rename = "28")]
    FourWeeks,
}

impl Horizon {
    pub const ALL: [Horizon; 2] = [Horizon::Week, Horizon::FourWeeks];

    pub fn days(self) -> usize {
        match self {
            Horizon::Week => 7,
            Horizon::FourWeeks => 28,
        }
    }

    pub fn from_days(days: usize) -> Result<Self> {
        match days {
            7 => Ok(Horizon::Week),
            28 => Ok(Horizon::FourWeeks),
            _ => Err(Error::Invalid(format!("horizon must be 7 or 28, got {days}"))),
        }
    }

    /// Last training day for real-data tasks.
    pub fn train_end(self) -> NaiveDate {
        match self {
            Horizon::Week => ymd(2021, 5, 8),
            Horizon::FourWeeks => ymd(2021, 4, 17),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowPolicy {
    SinceVaccine,
    Fixed200,
    FullHistory,
}

impl WindowPolicy {
    pub const ALL: [WindowPolicy; 3] = [
        WindowPolicy::SinceVaccine,
        WindowPolicy::Fixed200,
        WindowPolicy::FullHistory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WindowPolicy::SinceVaccine => "since_vaccine",
            WindowPolicy::Fixed200 => "fixed_200",
            WindowPolicy::FullHistory => "full_history",
        }
    }
}

impl fmt::Display for WindowPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WindowPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vaccine" | "since_vaccine" => Ok(WindowPolicy::SinceVaccine),
            "200" | "fixed_200" => Ok(WindowPolicy::Fixed200),
            "full" | "full_history" => Ok(WindowPolicy::FullHistory),
            _ => Err(Error::Invalid(format!("unknown window `{s}`"))),
        }
    }
}

/// Prediction task without region or window: `7-C`, `28-C`, `7-D`, `28-D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskKind {
    pub target: Target,
    pub horizon: Horizon,
}

impl TaskKind {
    /// The four tasks in reporting order.
    pub const ALL: [TaskKind; 4] = [
        TaskKind {
            target: Target::Confirmed,
            horizon: Horizon::Week,
        },
        TaskKind {
            target: Target::Confirmed,
            horizon: Horizon::FourWeeks,
        },
        TaskKind {
            target: Target::Death,
            horizon: Horizon::Week,
        },
        TaskKind {
            target: Target::Death,
            horizon: Horizon::FourWeeks,
        },
    ];

    pub fn code(self) -> String {
        let t = match self.target {
            Target::Confirmed => 'C',
            Target::Death => 'D',
        };
        format!("{}-{}", self.horizon.days(), t)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (h, t) = s
            .split_once('-')
            .ok_or_else(|| Error::Invalid(format!("task must look like 7-C, got `{s}`")))?;
        let horizon = Horizon::from_days(h.parse().map_err(|_| Error::Invalid(format!("bad horizon in `{s}`")))?)?;
        Ok(TaskKind {
            target: t.parse()?,
            horizon,
        })
    }
}

/// One forecasting problem: a region, a target, a horizon and a training window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ForecastTask {
    pub region: Region,
    pub target: Target,
    pub horizon: Horizon,
    pub window: WindowPolicy,
}

pub(crate) fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}

/// First day with reported cases for each state and target.
pub fn first_case_date(region: Region, target: Target) -> NaiveDate {
    use Region::*;
    use Target::*;
    match (region, target) {
        (CA, Confirmed) => ymd(2020, 1, 26),
        (NY, Confirmed) => ymd(2020, 3, 3),
        (TX, Confirmed) => ymd(2020, 3, 5),
        (MN, Confirmed) => ymd(2020, 3, 6),
        (HI, Confirmed) => ymd(2020, 3, 7),
        (CA, Death) => ymd(2020, 3, 4),
        (NY, Death) => ymd(2020, 3, 11),
        (TX, Death) => ymd(2020, 3, 17),
        (MN, Death) => ymd(2020, 3, 21),
        (HI, Death) => ymd(2020, 3, 24),
    }
}

/// Last day of the data used for evaluation.
pub fn snapshot_end() -> NaiveDate {
    ymd(2021, 5, 15)
}

impl ForecastTask {
    pub fn new(region: Region, target: Target, horizon: Horizon, window: WindowPolicy) -> Self {
        Self {
            region,
            target,
            horizon,
            window,
        }
    }

    pub fn kind(&self) -> TaskKind {
        TaskKind {
            target: self.target,
            horizon: self.horizon,
        }
    }

    /// Inclusive training date range.
    pub fn train_range(&self) -> (NaiveDate, NaiveDate) {
        let end = self.horizon.train_end();
        let start = match self.window {
            WindowPolicy::SinceVaccine => ymd(2020, 12, 15),
            WindowPolicy::Fixed200 => end - Duration::days(199),
            WindowPolicy::FullHistory => first_case_date(self.region, self.target),
        };
        (start, end)
    }

    /// Inclusive test date range: the horizon days right after training.
    pub fn test_range(&self) -> (NaiveDate, NaiveDate) {
        let (_, end) = self.train_range();
        (
            end + Duration::days(1),
            end + Duration::days(self.horizon.days() as i64),
        )
    }

    /// Every region/target/horizon/window combination.
    pub fn all() -> Vec<ForecastTask> {
        let mut out = Vec::with_capacity(60);
        for region in Region::ALL {
            for target in Target::ALL {
                for horizon in Horizon::ALL {
                    for window in WindowPolicy::ALL {
                        out.push(ForecastTask::new(region, target, horizon, window));
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for ForecastTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.kind(), self.region, self.window)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_window_is_200_days() {
        for task in ForecastTask::all() {
            let (s, e) = task.train_range();
            if task.window == WindowPolicy::Fixed200 {
                assert_eq!((e - s).num_days() + 1, 200);
            }
            let (ts, te) = task.test_range();
            assert_eq!(ts, e + Duration::days(1));
            assert_eq!((te - ts).num_days() + 1, task.horizon.days() as i64);
            assert_eq!(te, snapshot_end());
        }
    }

    #[test]
    fn parse_round_trips() {
        for k in TaskKind::ALL {
            assert_eq!(k.code().parse::<TaskKind>().unwrap(), k);
        }
        assert_eq!("hawaii".parse::<Region>().unwrap(), Region::HI);
        assert!("ZZ".parse::<Region>().is_err());
        assert_eq!("200".parse::<WindowPolicy>().unwrap(), WindowPolicy::Fixed200);
    }
}
