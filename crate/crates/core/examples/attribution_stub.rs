// Attribution tables from a stub forecaster whose error is a known constant.

use epicast::harness::{
    attribution_report, run_experiment, ExperimentGrid, Family, Quantity, RunOptions, StubForecaster,
};
use epicast::sarima;
use epicast::seir;
use epicast::synth::synthetic_snapshot;
use epicast::task::{Region, TaskKind, WindowPolicy};

pub fn run_example() -> epicast::Result<()> {
    let snap = synthetic_snapshot(5);
    let grid = ExperimentGrid {
        sarima: sarima::reduced_space()[..2].to_vec(),
        seir: seir::reduced_grid()[..4].to_vec(),
        acts: vec![(600, 16, 0.005)],
    };
    let g = grid.clone();
    // constant error per config, so every metric ranks runs the same way
    let stub = StubForecaster::new(move |config, task| match (config.family(), task.window) {
        (Family::Sarima, _) => 6.0,
        (Family::Acts, _) => 30.0,
        (Family::SeirHcd, WindowPolicy::Fixed200) => {
            let i = g.configs(Family::SeirHcd).iter().position(|c| c == config).unwrap();
            [12.0, 8.0, 20.0, 16.0][i]
        }
        (Family::SeirHcd, WindowPolicy::SinceVaccine) => 4.0,
        (Family::SeirHcd, WindowPolicy::FullHistory) => 25.0,
    });
    let kinds = [TaskKind::ALL[0]];
    let out = run_experiment(&snap, &grid, &kinds, &Region::ALL, &stub, &RunOptions::new(2, 0), None)?;
    println!("{} runs", out.records.len());
    let report = attribution_report(&out.records)?;
    let task = kinds[0].code();
    print!("{}", report.table(&task, "ALL", Quantity::Improvement));
    print!("{}", report.table(&task, "ALL", Quantity::Variation));
    Ok(())
}

fn main() -> epicast::Result<()> {
    run_example()
}
