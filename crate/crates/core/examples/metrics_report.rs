// Score a forecast with all seven metrics, including zero actuals.

use epicast::metrics::{evaluate, Metric};

pub fn run_example() -> epicast::Result<()> {
    let actual = [120.0, 0.0, 98.0, 143.0, 151.0, 0.0, 87.0];
    let forecast = [110.0, 4.0, 101.0, 150.0, 139.0, 2.0, 95.0];
    let report = evaluate(&actual, &forecast)?;
    for m in Metric::ALL {
        let arrow = if m.higher_is_better() { "up" } else { "down" };
        println!("{:<9} {:>10.4}  ({arrow})", m.name(), report.get(m));
    }
    // zero actuals drop out of the percentage error only
    println!("MAPE skipped {} of {} terms", report.mape_excluded_terms, report.n);
    assert_eq!(report.mape_excluded_terms, 2);
    assert!((report.rmse * report.rmse - report.mse).abs() < 1e-9);
    Ok(())
}

fn main() -> epicast::Result<()> {
    run_example()
}
