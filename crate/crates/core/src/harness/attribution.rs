use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::{Dimension, Family, ModelConfig};
use super::store::RunRecord;
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::task::{Region, TaskKind, WindowPolicy};

/// Which records share one min-max normalization.
pub const NORMALIZATION_SCOPE: &str =
    "per (task, region, metric) over every ok record of that task and region, all families and windows";

/// The configuration whose Accuracy is closest to the mean Accuracy of `records`, ties
/// broken by smallest key. Records that are not ok are ignored.
pub fn hyper_baseline(records: &[&RunRecord]) -> Option<ModelConfig> {
    let scored: Vec<(f64, &ModelConfig)> = records
        .iter()
        .filter(|r| r.is_ok())
        .filter_map(|r| r.report.as_ref()?.usable(Metric::Accuracy).map(|a| (a, &r.config)))
        .collect();
    if scored.is_empty() {
        return None;
    }
    let mean = scored.iter().map(|(a, _)| a).sum::<f64>() / scored.len() as f64;
    scored
        .into_iter()
        .min_by(|(a, ca), (b, cb)| {
            (a - mean)
                .abs()
                .total_cmp(&(b - mean).abs())
                .then_with(|| ca.key().cmp(&cb.key()))
        })
        .map(|(_, c)| c.clone())
}

/// The baseline setting of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    Family(Family),
    Config(ModelConfig),
    Window(WindowPolicy),
}

/// Model selection is pinned to SEIR-HCD and length to the 200-day window; the
/// hyperparameter baseline is the closest-to-mean configuration of `records`.
pub fn select_baseline(records: &[&RunRecord], dimension: Dimension) -> Result<Baseline> {
    match dimension {
        Dimension::ModelSelection => Ok(Baseline::Family(Family::SeirHcd)),
        Dimension::TsLength => Ok(Baseline::Window(WindowPolicy::Fixed200)),
        Dimension::HyperparameterTuning => hyper_baseline(records)
            .map(Baseline::Config)
            .ok_or_else(|| Error::Empty("no valid records for baseline selection".into())),
    }
}

/// Min-max normalized scores, aligned with the input records.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    /// `None` for records dropped as not ok or unusable for the metric.
    pub scores: Vec<Option<f64>>,
    pub min: f64,
    pub max: f64,
    /// All surviving raw scores were equal; every score is 0.5.
    pub degenerate: bool,
}

/// Larger-is-better scores in `[0, 1]`: error metrics are flipped after min-max scaling.
pub fn normalize_scores(records: &[&RunRecord], metric: Metric) -> Result<Normalized> {
    let raw: Vec<Option<f64>> = records
        .iter()
        .map(|r| {
            if r.is_ok() {
                r.report.as_ref()?.usable(metric)
            } else {
                None
            }
        })
        .collect();
    let (min, max) = raw
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    if !min.is_finite() {
        return Err(Error::Empty(format!("no valid {metric} scores to normalize")));
    }
    let degenerate = max == min;
    let scores = raw
        .iter()
        .map(|v| {
            v.map(|v| {
                if degenerate {
                    return 0.5;
                }
                let z = (v - min) / (max - min);
                if metric.higher_is_better() {
                    z
                } else {
                    1.0 - z
                }
            })
        })
        .collect();
    Ok(Normalized {
        scores,
        min,
        max,
        degenerate,
    })
}

/// Percentage points gained by the best sweep point over the baseline.
pub fn improvement(sweep: &[f64], baseline: f64) -> f64 {
    let best = sweep.iter().copied().fold(baseline, f64::max);
    (best - baseline) * 100.0
}

/// Percentage-point spread of the sweep.
pub fn variation(sweep: &[f64]) -> f64 {
    let (lo, hi) = sweep.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(*v), hi.max(*v))
    });
    if sweep.is_empty() {
        0.0
    } else {
        (hi - lo) * 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRow {
    pub task: String,
    /// A region code, or `ALL` for the average over regions.
    pub region: String,
    pub metric: Metric,
    pub dimension: Dimension,
    pub baseline: f64,
    pub improvement_pct: f64,
    pub variation_pct: f64,
    pub points: usize,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub metric: Metric,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBaselines {
    pub task: String,
    pub region: Region,
    /// Closest-to-mean configuration per family at the 200-day window.
    pub family_configs: Vec<ModelConfig>,
    pub bounds: Vec<Bounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub normalization_scope: String,
    pub rows: Vec<AttributionRow>,
    pub baselines: Vec<RegionBaselines>,
    /// Task and region pairs skipped for missing sweeps.
    pub incomplete: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Improvement,
    Variation,
}

impl AttributionReport {
    pub fn cell(&self, task: &str, region: &str, dimension: Dimension, metric: Metric) -> Option<&AttributionRow> {
        self.rows
            .iter()
            .find(|r| r.task == task && r.region == region && r.dimension == dimension && r.metric == metric)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "task",
            "region",
            "metric",
            "dimension",
            "baseline",
            "improvement_pct",
            "variation_pct",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.task.clone(),
                r.region.clone(),
                r.metric.name().to_string(),
                r.dimension.as_str().to_string(),
                format!("{}", r.baseline),
                format!("{}", r.improvement_pct),
                format!("{}", r.variation_pct),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    /// MS, HT and LEN rows across the seven metric columns for one task.
    pub fn table(&self, task: &str, region: &str, quantity: Quantity) -> String {
        let mut out = String::new();
        let title = match quantity {
            Quantity::Improvement => "improvement",
            Quantity::Variation => "variation",
        };
        let _ = writeln!(out, "{task} {region} {title} (%)");
        let _ = write!(out, "{:<5}", "");
        for m in Metric::ALL {
            let _ = write!(out, "{:>10}", m.name());
        }
        out.push('\n');
        for d in Dimension::ALL {
            let _ = write!(out, "{:<5}", d.short());
            for m in Metric::ALL {
                match self.cell(task, region, d, m) {
                    Some(c) => {
                        let v = match quantity {
                            Quantity::Improvement => c.improvement_pct,
                            Quantity::Variation => c.variation_pct,
                        };
                        let _ = write!(out, "{v:>10.2}");
                    }
                    None => {
                        let _ = write!(out, "{:>10}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

struct Sweep {
    points: Vec<usize>,
    baseline: usize,
}

fn position(pool: &[&RunRecord], f: impl Fn(&RunRecord) -> bool) -> Option<usize> {
    pool.iter().position(|r| f(r))
}

fn region_rows(
    kind: TaskKind,
    region: Region,
    records: &[RunRecord],
) -> std::result::Result<(Vec<AttributionRow>, RegionBaselines), String> {
    let pool: Vec<&RunRecord> = records
        .iter()
        .filter(|r| r.task.kind() == kind && r.task.region == region && r.is_ok())
        .collect();
    let at_200 = |r: &RunRecord| r.window_policy == WindowPolicy::Fixed200;
    let mut family_configs = Vec::new();
    for family in Family::ALL {
        let sweep: Vec<&RunRecord> = pool
            .iter()
            .copied()
            .filter(|r| at_200(r) && r.config.family() == family)
            .collect();
        if let Some(c) = hyper_baseline(&sweep) {
            family_configs.push(c);
        }
    }
    let seir_base = family_configs
        .iter()
        .find(|c| c.family() == Family::SeirHcd)
        .cloned()
        .ok_or("no valid SEIR_HCD runs at the 200-day window")?;
    let base = position(&pool, |r| at_200(r) && r.config == seir_base).expect("baseline record is in the pool");

    let ms = Sweep {
        points: family_configs
            .iter()
            .filter_map(|c| position(&pool, |r| at_200(r) && &r.config == c))
            .collect(),
        baseline: base,
    };
    let ht = Sweep {
        points: (0..pool.len())
            .filter(|&i| at_200(pool[i]) && pool[i].config.family() == Family::SeirHcd)
            .collect(),
        baseline: base,
    };
    let len_points: Vec<usize> = WindowPolicy::ALL
        .iter()
        .filter_map(|w| position(&pool, |r| r.window_policy == *w && r.config == seir_base))
        .collect();
    if len_points.len() < WindowPolicy::ALL.len() {
        return Err("length sweep incomplete".into());
    }
    let len = Sweep {
        points: len_points,
        baseline: base,
    };

    let mut rows = Vec::new();
    let mut bounds = Vec::new();
    for metric in Metric::ALL {
        let Ok(norm) = normalize_scores(&pool, metric) else {
            continue;
        };
        bounds.push(Bounds {
            metric,
            min: norm.min,
            max: norm.max,
        });
        for (dimension, sweep) in [
            (Dimension::ModelSelection, &ms),
            (Dimension::HyperparameterTuning, &ht),
            (Dimension::TsLength, &len),
        ] {
            let Some(b) = norm.scores[sweep.baseline] else {
                continue;
            };
            let vals: Vec<f64> = sweep.points.iter().filter_map(|&i| norm.scores[i]).collect();
            rows.push(AttributionRow {
                task: kind.code(),
                region: region.code().to_string(),
                metric,
                dimension,
                baseline: b,
                improvement_pct: improvement(&vals, b),
                variation_pct: variation(&vals),
                points: vals.len(),
                degenerate: norm.degenerate,
            });
        }
    }
    Ok((
        rows,
        RegionBaselines {
            task: kind.code(),
            region,
            family_configs,
            bounds,
        },
    ))
}

fn averaged(rows: &[AttributionRow]) -> Vec<AttributionRow> {
    let tasks: BTreeSet<&str> = rows.iter().map(|r| r.task.as_str()).collect();
    let mut out = Vec::new();
    for task in tasks {
        for dimension in Dimension::ALL {
            for metric in Metric::ALL {
                let cells: Vec<&AttributionRow> = rows
                    .iter()
                    .filter(|r| r.task == task && r.dimension == dimension && r.metric == metric)
                    .collect();
                if cells.is_empty() {
                    continue;
                }
                let n = cells.len() as f64;
                let mean = |f: fn(&AttributionRow) -> f64| cells.iter().map(|c| f(c)).sum::<f64>() / n;
                out.push(AttributionRow {
                    task: task.to_string(),
                    region: "ALL".into(),
                    metric,
                    dimension,
                    baseline: mean(|c| c.baseline),
                    improvement_pct: mean(|c| c.improvement_pct),
                    variation_pct: mean(|c| c.variation_pct),
                    points: cells.len(),
                    degenerate: cells.iter().any(|c| c.degenerate),
                });
            }
        }
    }
    out
}

/// Improvement and variation of every dimension for each task and region in `records`,
/// plus region averages per task.
pub fn attribution_report(records: &[RunRecord]) -> Result<AttributionReport> {
    let pairs: BTreeSet<(TaskKind, Region)> = records.iter().map(|r| (r.task.kind(), r.task.region)).collect();
    let mut rows = Vec::new();
    let mut baselines = Vec::new();
    let mut incomplete = Vec::new();
    for (kind, region) in pairs {
        match region_rows(kind, region, records) {
            Ok((r, b)) => {
                rows.extend(r);
                baselines.push(b);
            }
            Err(why) => incomplete.push(format!("{kind} {region}: {why}")),
        }
    }
    if rows.is_empty() {
        return Err(Error::Empty(format!(
            "no complete dimension sweeps ({})",
            if incomplete.is_empty() {
                "no records".to_string()
            } else {
                incomplete.join("; ")
            }
        )));
    }
    let avg = averaged(&rows);
    rows.extend(avg);
    Ok(AttributionReport {
        normalization_scope: NORMALIZATION_SCOPE.into(),
        rows,
        baselines,
        incomplete,
    })
}
