// Parse a JHU-format snapshot, aggregate counties to states and cut one task window.

use epicast::ingest::{build_task_dataset, Snapshot};
use epicast::series::summary_stats;
use epicast::synth::jhu_snapshot;
use epicast::task::{ForecastTask, Horizon, Region, Target, WindowPolicy};

pub fn run_example() -> epicast::Result<()> {
    // swap in Snapshot::load_dir for the real pinned files
    let (confirmed, deaths) = jhu_snapshot(7);
    let snap = Snapshot::from_texts(&confirmed, &deaths)?;
    println!("snapshot {}", snap.content_hash);

    for region in Region::ALL {
        let daily = snap.daily(region, Target::Confirmed)?;
        let s = summary_stats(&daily)?;
        println!(
            "{:<3} pop {:>9} days {:>3} max {:>8.0} mean {:>9.2}",
            region.code(),
            snap.population(region)?,
            daily.len(),
            s.max,
            s.mean
        );
    }

    let task = ForecastTask::new(Region::NY, Target::Death, Horizon::Week, WindowPolicy::Fixed200);
    let ds = build_task_dataset(&snap, task)?;
    println!(
        "{task}: train {}..{} ({} days), test {}..{}",
        ds.train.start(),
        ds.train.end(),
        ds.train.len(),
        ds.test.start(),
        ds.test.end()
    );
    assert_eq!(ds.train.len(), 200);
    Ok(())
}

fn main() -> epicast::Result<()> {
    run_example()
}
