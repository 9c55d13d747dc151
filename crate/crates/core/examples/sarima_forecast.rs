// Fit a weekly SARIMA by exact likelihood, then search a small order grid.

use epicast::metrics::{evaluate, Metric};
use epicast::sarima::{self, FitOptions, GridOptions, SarimaOrder};
use epicast::synth::arma_series;

pub fn run_example() -> epicast::Result<()> {
    // positive series with a weekly AR component
    let noise = arma_series(&sarima::params::expand_ar(&[0.5], &[0.4], 7), &[], 1.0, 300, 21);
    let y: Vec<f64> = noise
        .iter()
        .enumerate()
        .map(|(t, e)| 200.0 + 0.3 * t as f64 + 8.0 * e)
        .collect();
    let (train, test) = y.split_at(293);

    let order = SarimaOrder::weekly(1, 1, 1, 1, 0, 0)?;
    let (fit, fc) = sarima::fit_and_forecast(train, order, 7, &FitOptions::default())?;
    println!(
        "{order}: phi {:?} theta {:?} Phi {:?} loglik {:.2}",
        fit.phi, fit.theta, fit.seasonal_phi, fit.loglik
    );
    let r = evaluate(test, &fc)?;
    println!("7-day MAE {:.3}, accuracy {:.4}", r.mae, r.accuracy);

    let space: Vec<SarimaOrder> = sarima::reduced_space().into_iter().take(6).collect();
    let opts = GridOptions {
        criterion: Metric::Mae,
        ..Default::default()
    };
    let grid = sarima::grid_search(train, &space, 7, &opts)?;
    for e in grid.ranked.iter().take(3) {
        println!("  {} MAE {:.3}", e.order, e.report.mae);
    }
    Ok(())
}

fn main() -> epicast::Result<()> {
    run_example()
}
