use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::acts;
use crate::error::{Error, Result};
use crate::sarima::{self, SarimaOrder};
use crate::seir::{self, SeirHcdParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Family {
    Sarima,
    SeirHcd,
    Acts,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Sarima, Family::SeirHcd, Family::Acts];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Sarima => "SARIMA",
            Family::SeirHcd => "SEIR_HCD",
            Family::Acts => "ACTS",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "sarima" => Ok(Family::Sarima),
            "seirhcd" | "seir" => Ok(Family::SeirHcd),
            "acts" => Ok(Family::Acts),
            _ => Err(Error::Invalid(format!("unknown model family `{s}`"))),
        }
    }
}

/// One point of a family's hyperparameter space. For SEIR-HCD this is a single
/// optimizer start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelConfig {
    Sarima { order: SarimaOrder },
    SeirHcd { start: SeirHcdParams },
    Acts { epochs: usize, hidden: usize, rate: f64 },
}

impl ModelConfig {
    pub fn family(&self) -> Family {
        match self {
            ModelConfig::Sarima { .. } => Family::Sarima,
            ModelConfig::SeirHcd { .. } => Family::SeirHcd,
            ModelConfig::Acts { .. } => Family::Acts,
        }
    }

    /// Canonical text form, used for ordering, seeds and store keys.
    pub fn key(&self) -> String {
        match self {
            ModelConfig::Sarima { order } => format!("SARIMA{order}"),
            ModelConfig::SeirHcd { start } => {
                let v: Vec<String> = start.to_vec().iter().map(|x| format!("{x}")).collect();
                format!("SEIR_HCD[{}]", v.join(","))
            }
            ModelConfig::Acts { epochs, hidden, rate } => format!("ACTS({epochs},{hidden},{rate})"),
        }
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

/// The configurations swept for each family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub sarima: Vec<SarimaOrder>,
    pub seir: Vec<SeirHcdParams>,
    pub acts: Vec<(usize, usize, f64)>,
}

impl ExperimentGrid {
    /// Desk-scale grids: 216 SARIMA orders, 32 SEIR-HCD starts, ACTS at 600 epochs.
    pub fn reduced() -> Self {
        Self {
            sarima: sarima::reduced_space(),
            seir: seir::reduced_grid(),
            acts: acts::reduced_space(),
        }
    }

    pub fn full() -> Self {
        Self {
            sarima: sarima::full_space(),
            seir: seir::full_grid(),
            acts: acts::full_space(),
        }
    }

    pub fn configs(&self, family: Family) -> Vec<ModelConfig> {
        match family {
            Family::Sarima => self.sarima.iter().map(|&order| ModelConfig::Sarima { order }).collect(),
            Family::SeirHcd => self.seir.iter().map(|&start| ModelConfig::SeirHcd { start }).collect(),
            Family::Acts => self
                .acts
                .iter()
                .map(|&(epochs, hidden, rate)| ModelConfig::Acts { epochs, hidden, rate })
                .collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.sarima.len() + self.seir.len() + self.acts.len()
    }
}

/// The three experimental dimensions varied one at a time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    ModelSelection,
    HyperparameterTuning,
    TsLength,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [
        Dimension::ModelSelection,
        Dimension::HyperparameterTuning,
        Dimension::TsLength,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::ModelSelection => "model_selection",
            Dimension::HyperparameterTuning => "hyperparameter_tuning",
            Dimension::TsLength => "ts_length",
        }
    }

    /// Row label in the attribution tables.
    pub fn short(self) -> &'static str {
        match self {
            Dimension::ModelSelection => "MS",
            Dimension::HyperparameterTuning => "HT",
            Dimension::TsLength => "LEN",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes_and_keys() {
        let g = ExperimentGrid::reduced();
        assert_eq!(g.sarima.len(), 216);
        assert_eq!(g.seir.len(), 32);
        assert_eq!(g.acts.len(), 6);
        let f = ExperimentGrid::full();
        assert_eq!(f.acts.len(), 18);
        assert_eq!(f.configs(Family::SeirHcd).len(), 864);
        let c = ModelConfig::Acts {
            epochs: 600,
            hidden: 16,
            rate: 0.005,
        };
        assert_eq!(c.key(), "ACTS(600,16,0.005)");
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("\"family\":\"ACTS\""));
        assert_eq!(serde_json::from_str::<ModelConfig>(&json).unwrap(), c);
        assert_eq!("seirhcd".parse::<Family>().unwrap(), Family::SeirHcd);
        assert_eq!("SEIR_HCD".parse::<Family>().unwrap(), Family::SeirHcd);
    }
}
