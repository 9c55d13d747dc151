use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit, forecast, FitOptions, SarimaFit, SarimaOrder};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, Metric, MetricReport};
use crate::preprocess::BoxCoxTransform;

/// The full search space: p, q, P, Q in 0..=4, d in {1,2}, D in {0,1,2}.
pub fn full_space() -> Vec<SarimaOrder> {
    space(4, 1)
}

/// Desk-scale space: p, q up to 2 and P, Q up to 1.
pub fn reduced_space() -> Vec<SarimaOrder> {
    space(2, 1).into_iter().filter(|o| o.sp <= 1 && o.sq <= 1).collect()
}

fn space(max_pq: usize, min_d: usize) -> Vec<SarimaOrder> {
    let mut out = Vec::new();
    for p in 0..=max_pq {
        for d in min_d..=2 {
            for q in 0..=max_pq {
                for sp in 0..=max_pq {
                    for sd in 0..=2 {
                        for sq in 0..=max_pq {
                            out.push(SarimaOrder::weekly(p, d, q, sp, sd, sq).expect("in range"));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Box-Cox the raw training values, fit, forecast `h` days, and map back to counts
/// (floored at zero).
pub fn fit_and_forecast(
    train: &[f64],
    order: SarimaOrder,
    h: usize,
    opts: &FitOptions,
) -> Result<(SarimaFit, Vec<f64>)> {
    let transform = BoxCoxTransform::fit(train)?;
    let z = transform.apply(train)?;
    let fit = fit(&z, order, transform, opts)?;
    let fz = forecast(&fit, h)?;
    let back = transform.invert(&fz).values;
    if back.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailed(format!("{order}: non-finite forecast")));
    }
    Ok((fit, back.into_iter().map(|v| v.max(0.0)).collect()))
}

#[derive(Debug, Clone, Copy)]
pub struct GridOptions {
    pub criterion: Metric,
    pub fit: FitOptions,
    pub parallel: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            criterion: Metric::Accuracy,
            fit: FitOptions::default(),
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub order: SarimaOrder,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    /// Best first.
    pub ranked: Vec<GridEntry>,
    /// Orders whose fit, forecast or criterion score failed, with the reason.
    pub failed: Vec<(SarimaOrder, String)>,
}

/// Fits every order on `series` minus its last `h` values and ranks them on that tail.
pub fn grid_search(series: &[f64], space: &[SarimaOrder], h: usize, opts: &GridOptions) -> Result<GridResult> {
    if space.is_empty() {
        return Err(Error::Empty("grid search space".into()));
    }
    if h == 0 || series.len() <= h {
        return Err(Error::Length {
            needed: h + 1,
            got: series.len(),
        });
    }
    let (train, tail) = series.split_at(series.len() - h);
    let run = |order: &SarimaOrder| -> (SarimaOrder, Result<MetricReport>) {
        let res = fit_and_forecast(train, *order, h, &opts.fit).and_then(|(_, fc)| evaluate(tail, &fc));
        (*order, res)
    };
    let mut results: Vec<(SarimaOrder, Result<MetricReport>)> = if opts.parallel {
        space.par_iter().map(run).collect()
    } else {
        space.iter().map(run).collect()
    };
    results.sort_by_key(|(o, _)| *o);

    let mut ranked = Vec::new();
    let mut failed = Vec::new();
    for (order, res) in results {
        match res {
            Ok(report) if report.usable(opts.criterion).is_some() => ranked.push(GridEntry { order, report }),
            Ok(_) => failed.push((order, format!("{} is not finite", opts.criterion))),
            Err(e) => failed.push((order, e.to_string())),
        }
    }
    if ranked.is_empty() {
        return Err(Error::NoValidResults(format!("all {} orders failed", space.len())));
    }
    let metric = opts.criterion;
    ranked.sort_by(|a, b| {
        let (x, y) = (a.report.get(metric), b.report.get(metric));
        let primary = if metric.higher_is_better() {
            y.total_cmp(&x)
        } else {
            x.total_cmp(&y)
        };
        primary.then(a.order.cmp(&b.order))
    });
    Ok(GridResult { ranked, failed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::arma_series;

    #[test]
    fn space_sizes() {
        assert_eq!(full_space().len(), 3750);
        assert_eq!(reduced_space().len(), 216);
    }

    #[test]
    fn singleton_space() {
        let x: Vec<f64> = (0..60).map(|t| 100.0 + t as f64 + (t % 3) as f64).collect();
        let o = SarimaOrder::weekly(0, 1, 0, 0, 0, 0).unwrap();
        let r = grid_search(&x, &[o], 7, &GridOptions::default()).unwrap();
        assert_eq!(r.ranked.len(), 1);
        assert_eq!(r.ranked[0].order, o);
    }

    #[test]
    fn ar_family_beats_ma_family_on_ar_data() {
        let steps = arma_series(&[0.8], &[], 1.0, 400, 21);
        let x: Vec<f64> = steps
            .iter()
            .scan(500.0, |a, e| {
                *a += e;
                Some(*a)
            })
            .collect();
        let space: Vec<SarimaOrder> = [(0, 0), (1, 0), (0, 1), (1, 1)]
            .iter()
            .map(|&(p, q)| SarimaOrder::weekly(p, 1, q, 0, 0, 0).unwrap())
            .collect();
        let opts = GridOptions {
            criterion: Metric::Mse,
            ..GridOptions::default()
        };
        let h = 7;
        let r = grid_search(&x, &space, h, &opts).unwrap();
        // Exhaustive oracle: score each order on its own and sort.
        let (train, tail) = x.split_at(x.len() - h);
        let mut oracle: Vec<(f64, SarimaOrder)> = space
            .iter()
            .map(|o| {
                let (_, fc) = fit_and_forecast(train, *o, h, &opts.fit).unwrap();
                let mse = tail.iter().zip(&fc).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / h as f64;
                (mse, *o)
            })
            .collect();
        oracle.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let got: Vec<SarimaOrder> = r.ranked.iter().map(|e| e.order).collect();
        let want: Vec<SarimaOrder> = oracle.iter().map(|(_, o)| *o).collect();
        assert_eq!(got, want);
        let pos = |p, q| got.iter().position(|o| o.p == p && o.q == q).unwrap();
        assert!(pos(1, 0) < pos(0, 1));
    }
}
