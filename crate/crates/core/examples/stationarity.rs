// Box-Cox plus differencing until ADF rejects a unit root.

use epicast::preprocess::{adf_test, stationarize, SignificanceLevel};
use epicast::synth::synthetic_snapshot;
use epicast::task::{Region, Target};

pub fn run_example() -> epicast::Result<()> {
    let snap = synthetic_snapshot(3);
    for target in Target::ALL {
        let daily = snap.daily(Region::TX, target)?;
        let raw = adf_test(daily.values())?;
        let (bc, w) = stationarize(daily.values(), target)?;
        let done = adf_test(&w)?;
        println!(
            "TX {:<9} raw ADF {:>8.3}  lambda {:>6.3}  processed ADF {:>8.3} (lags {}, reject 5% {})",
            target.as_str(),
            raw.statistic,
            bc.lambda,
            done.statistic,
            done.lags_used,
            done.rejects(SignificanceLevel::FivePercent)
        );
    }
    Ok(())
}

fn main() -> epicast::Result<()> {
    run_example()
}
